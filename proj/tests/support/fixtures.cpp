#include "fixtures.hpp"

#include <atomic>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unistd.h>

namespace fixture {

namespace fs = std::filesystem;

TempDir::TempDir() {
  static std::atomic<int> counter{0};
  path_ = fs::temp_directory_path() /
          ("proofgrade-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  fs::remove_all(path_);
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

proofgrade::ProblemGrader constant_grader(const std::string& problem_id,
                                          const std::string& provider_id, std::size_t dim,
                                          const proofgrade::RubricVector& verdict) {
  proofgrade::ProblemGrader g;
  g.problem_id = problem_id;
  g.provider_id = provider_id;
  for (std::size_t i = 0; i < proofgrade::kRubricCount; ++i) {
    auto& m = g.models[i];
    m.rubric = i;
    m.problem_id = problem_id;
    m.provider_id = provider_id;
    m.params = proofgrade::SoftmaxParams::zeros(dim);
    m.params.bias = verdict[i] ? std::array<double, 2>{0.0, 1.0}
                               : std::array<double, 2>{1.0, 0.0};
    m.trained_epochs = 1;
  }
  return g;
}

proofgrade::ProviderConfig test_provider(std::size_t dim, std::uint64_t seed) {
  proofgrade::ProviderConfig c;
  c.provider_id = "test";
  c.kind = proofgrade::ProviderKind::DeterministicTest;
  c.dim = dim;
  c.seed = seed;
  c.needs_math_merge = true;
  return c;
}

std::shared_ptr<proofgrade::Embedder> test_embedder(std::size_t dim) {
  return std::make_shared<proofgrade::Embedder>(
      proofgrade::Embedder::from_config(test_provider(dim)));
}

proofgrade::RubricVector bits(const std::string& compact) {
  if (compact.size() != proofgrade::kRubricCount) throw std::invalid_argument(compact);
  proofgrade::RubricVector v;
  for (std::size_t i = 0; i < compact.size(); ++i) v[i] = compact[i] == '1' ? 1 : 0;
  return v;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  out << contents;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

}  // namespace fixture
