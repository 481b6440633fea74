// Builds the jet-engine compressor model directly with the library API,
// searches degrees 2, 4, 6 in parallel, re-validates the certificate and
// prints a coarse ASCII view of its level sets.

#include <iostream>

#include "bcert/app/simulate.hpp"
#include "bcert/engine.hpp"
#include "bcert/format.hpp"
#include "bcert/parse.hpp"

namespace {

bcert::Box MakeBox(std::vector<const char*> lo, std::vector<const char*> hi) {
  bcert::Box b;
  for (const char* s : lo) b.lower.push_back(bcert::rational_from_decimal(s));
  for (const char* s : hi) b.upper.push_back(bcert::rational_from_decimal(s));
  return b;
}

}  // namespace

int main() {
  using namespace bcert;
  auto vars = VariableTable::standard(2);
  const CtDs jet{{parse_polynomial("-x2 - 1.5*x1^2 - 0.5*x1^3", vars), parse_polynomial("x1", vars)}};

  SafetyProblem prob;
  prob.space = MakeBox({"0.1", "0.1"}, {"1", "1"});
  prob.initial = MakeBox({"0.1", "0.1"}, {"0.5", "0.5"});
  prob.unsafe = {MakeBox({"0.7", "0.7"}, {"1", "1"})};

  const SearchResult search = parallel_search(jet, prob, SearchPlan::up_to(6, SystemClass::kCtDs));
  for (const DegreeLog& l : search.log) {
    std::cout << "degree " << l.degree << ": " << to_string(l.status) << " (" << l.seconds << " s)\n";
  }
  if (!search.feasible()) {
    std::cout << "no certificate: " << to_string(search.status) << "\n";
    return 1;
  }

  const Certificate& cert = *search.best->certificate;
  std::cout << "B(x) = " << to_text(cert.barrier) << "\n"
            << "gamma = " << cert.gamma << ", lambda = " << cert.lambda << "\n";

  SafetyProblem at_degree = prob;
  at_degree.b_degree = cert.degree;
  const ValidationReport rep = check_certificate(cert, jet, at_degree);
  std::cout << "independent check: " << (rep.ok ? "ok" : "failed") << " (min Gram eigenvalue "
            << rep.min_gram_eigenvalue << ", " << rep.samples << " samples)\n";

  // '.' below gamma (contains the initial set), '#' at or above lambda
  // (contains the unsafe set), ' ' in between. Row 0 is the top of the box.
  const app::LevelSetGrid grid = app::level_set_grid(cert.barrier, cert.gamma, cert.lambda, prob.space, 31);
  for (std::size_t j = grid.ys.size(); j-- > 0;) {
    std::string row;
    for (std::size_t i = 0; i < grid.xs.size(); ++i) {
      const double v = grid.values[j][i];
      row += v <= cert.gamma ? '.' : v >= cert.lambda ? '#' : ' ';
    }
    std::cout << "|" << row << "|\n";
  }
  return rep.ok ? 0 : 1;
}
