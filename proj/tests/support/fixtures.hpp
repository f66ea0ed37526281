#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "proofgrade/corpus.hpp"
#include "proofgrade/embeddings.hpp"
#include "proofgrade/grader.hpp"

namespace fixture {

// Removes the directory tree on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Bias-only grader that returns `verdict` for every input.
proofgrade::ProblemGrader constant_grader(const std::string& problem_id,
                                          const std::string& provider_id, std::size_t dim,
                                          const proofgrade::RubricVector& verdict);

proofgrade::ProviderConfig test_provider(std::size_t dim = 64, std::uint64_t seed = 0);

std::shared_ptr<proofgrade::Embedder> test_embedder(std::size_t dim = 64);

proofgrade::RubricVector bits(const std::string& compact);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& contents);

}  // namespace fixture
