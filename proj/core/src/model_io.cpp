#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "proofgrade/error.hpp"
#include "proofgrade/grader.hpp"

namespace proofgrade {
namespace {

constexpr char kMagic[4] = {'P', 'G', 'M', 'D'};

template <typename T>
void put(std::ostream& out, T value) {
  static_assert(std::is_unsigned_v<T>);
  char buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i)
    buf[i] = static_cast<char>((value >> (8 * i)) & 0xff);
  out.write(buf, sizeof(T));
}

void put_f64(std::ostream& out, double v) { put<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v)); }

void put_str(std::ostream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  void read(void* dst, std::size_t n, const char* what) {
    in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n)
      throw Error(ErrorKind::Format, std::string("model file truncated at offset ") +
                                         std::to_string(offset_ + in_.gcount()) +
                                         " while reading " + what);
    offset_ += n;
  }

  template <typename T>
  T get(const char* what) {
    unsigned char buf[sizeof(T)];
    read(buf, sizeof(T), what);
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(buf[i]) << (8 * i);
    return v;
  }

  double get_f64(const char* what) { return std::bit_cast<double>(get<std::uint64_t>(what)); }

  std::string get_str(const char* what) {
    const auto len = get<std::uint32_t>(what);
    if (len > (1u << 20))
      throw Error(ErrorKind::Format, std::string("model file: implausible length for ") + what);
    std::string s(len, '\0');
    read(s.data(), len, what);
    return s;
  }

  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

 private:
  std::istream& in_;
  std::uint64_t offset_ = 0;
};

}  // namespace

void write_model(std::ostream& out, const ProblemGrader& grader) {
  grader.validate();
  out.write(kMagic, sizeof kMagic);
  put<std::uint16_t>(out, kModelFormatVersion);
  put_str(out, grader.problem_id);
  put_str(out, grader.provider_id);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(grader.dim()));
  put<std::uint64_t>(out, grader.models[0].seed);
  put<std::uint8_t>(out, static_cast<std::uint8_t>(kRubricCount));
  for (const auto& m : grader.models) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(m.trained_epochs));
    put_f64(out, m.train_loss_final);
  }
  for (const auto& m : grader.models) {
    for (double w : m.params.weights) put_f64(out, w);
    put_f64(out, m.params.bias[0]);
    put_f64(out, m.params.bias[1]);
  }
  if (!out) throw Error(ErrorKind::Format, "failed to write model");
}

ProblemGrader read_model(std::istream& in) {
  Reader r(in);
  char magic[4];
  r.read(magic, 4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw Error(ErrorKind::Format, "not a model file (bad magic bytes)");
  const auto version = r.get<std::uint16_t>("version");
  if (version != kModelFormatVersion)
    throw Error(ErrorKind::Format, "unsupported model format version " +
                                       std::to_string(version) + " (expected " +
                                       std::to_string(kModelFormatVersion) + ")");
  ProblemGrader g;
  g.problem_id = r.get_str("problem_id");
  g.provider_id = r.get_str("provider_id");
  const auto dim = r.get<std::uint32_t>("dim");
  const auto seed = r.get<std::uint64_t>("seed");
  const auto count = r.get<std::uint8_t>("model count");
  if (count != kRubricCount)
    throw Error(ErrorKind::Format, "model file holds " + std::to_string(count) +
                                       " rubric models, expected 7");
  if (dim == 0) throw Error(ErrorKind::Format, "model file has dimension 0");

  for (std::size_t i = 0; i < kRubricCount; ++i) {
    auto& m = g.models[i];
    m.rubric = i;
    m.problem_id = g.problem_id;
    m.provider_id = g.provider_id;
    m.seed = seed + i;
    m.trained_epochs = static_cast<int>(r.get<std::uint32_t>("trained_epochs"));
    m.train_loss_final = r.get_f64("train_loss_final");
  }
  for (auto& m : g.models) {
    m.params = SoftmaxParams::zeros(dim);
    for (double& w : m.params.weights) w = r.get_f64("weights");
    m.params.bias[0] = r.get_f64("bias");
    m.params.bias[1] = r.get_f64("bias");
  }
  if (!r.at_end()) throw Error(ErrorKind::Format, "model file has trailing bytes");
  g.validate();
  return g;
}

void save_model(const std::filesystem::path& path, const ProblemGrader& grader) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Input, "cannot write model file " + path.string());
  write_model(out, grader);
}

ProblemGrader load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::NotFound, "model file not found: " + path.string());
  return read_model(in);
}

}  // namespace proofgrade
