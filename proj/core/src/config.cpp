#include "proofgrade/config.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <istream>
#include <sstream>

#include "proofgrade/error.hpp"

namespace proofgrade {
namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string unquote(std::string v) {
  if (v.size() >= 2 && ((v.front() == '"' && v.back() == '"') ||
                        (v.front() == '\'' && v.back() == '\'')))
    return v.substr(1, v.size() - 2);
  return v;
}

struct Ctx {
  std::string where;

  [[noreturn]] void fail(const std::string& msg) const {
    throw Error(ErrorKind::Config, where + ": " + msg);
  }

  template <typename T>
  T integer(const std::string& key, const std::string& v) const {
    T out{};
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || ec != std::errc() || p != v.data() + v.size())
      fail("'" + key + "' expects an integer, got '" + v + "'");
    return out;
  }

  double real(const std::string& key, const std::string& v) const {
    try {
      std::size_t used = 0;
      const double d = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return d;
    } catch (const std::exception&) {
      fail("'" + key + "' expects a number, got '" + v + "'");
    }
  }

  bool boolean(const std::string& key, const std::string& v) const {
    std::string l = v;
    std::transform(l.begin(), l.end(), l.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (l == "true" || l == "yes" || l == "on" || l == "1") return true;
    if (l == "false" || l == "no" || l == "off" || l == "0") return false;
    fail("'" + key + "' expects true or false, got '" + v + "'");
  }
};

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& v) {
  std::filesystem::path p(v);
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

void set_provider_field(ProviderConfig& p, const std::string& field, const std::string& v,
                        const Ctx& ctx, const std::filesystem::path& base) {
  const std::string key = p.provider_id + "." + field;
  if (field == "kind") {
    try {
      p.kind = parse_provider_kind(v);
    } catch (const Error& e) {
      ctx.fail(e.what());
    }
  } else if (field == "dim") {
    p.dim = ctx.integer<std::size_t>(key, v);
  } else if (field == "needs_math_merge") {
    p.needs_math_merge = ctx.boolean(key, v);
  } else if (field == "max_batch") {
    p.max_batch = ctx.integer<std::size_t>(key, v);
  } else if (field == "max_in_flight") {
    p.max_in_flight = ctx.integer<std::size_t>(key, v);
  } else if (field == "endpoint_url" || field == "endpoint") {
    p.endpoint_url = v;
  } else if (field == "model") {
    p.model = v;
  } else if (field == "credential_env") {
    p.credential_env = v;
  } else if (field == "max_retries") {
    p.max_retries = ctx.integer<int>(key, v);
  } else if (field == "initial_backoff_ms") {
    p.initial_backoff = std::chrono::milliseconds(ctx.integer<long>(key, v));
  } else if (field == "request_timeout_s") {
    p.request_timeout = std::chrono::seconds(ctx.integer<long>(key, v));
  } else if (field == "seed") {
    p.seed = ctx.integer<std::uint64_t>(key, v);
  } else if (field == "import_path") {
    p.import_path = resolve(base, v);
  } else {
    ctx.fail("unknown provider field '" + field + "'");
  }
}

std::vector<int> parse_grid(const std::string& key, const std::string& v, const Ctx& ctx) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(ctx.integer<int>(key, trim(item)));
  if (out.empty()) ctx.fail("'" + key + "' must list at least one epoch count");
  return out;
}

void set_training(AppConfig& c, const std::string& key, const std::string& v, const Ctx& ctx) {
  auto& t = c.training;
  if (key == "batch_size") {
    t.batch_size = ctx.integer<std::size_t>(key, v);
  } else if (key == "epochs" || key == "epochs_grid") {
    t.epochs_grid = parse_grid(key, v, ctx);
  } else if (key == "peak_lr") {
    t.peak_lr = ctx.real(key, v);
  } else if (key == "warmup_frac") {
    t.warmup_frac = ctx.real(key, v);
  } else if (key == "decay_floor_frac") {
    t.decay_floor_frac = ctx.real(key, v);
  } else if (key == "seed") {
    t.seed = ctx.integer<std::uint64_t>(key, v);
  } else if (key == "threads") {
    t.threads = ctx.integer<unsigned>(key, v);
  } else if (key == "selection_split") {
    if (v == "validation") {
      t.selection_split = SelectionSplit::Validation;
    } else if (v == "test") {
      t.selection_split = SelectionSplit::Test;
    } else {
      ctx.fail("'selection_split' must be validation or test");
    }
  } else if (key == "train_fraction") {
    c.fractions.train = ctx.real(key, v);
  } else if (key == "test_fraction") {
    c.fractions.test = ctx.real(key, v);
  } else if (key == "validation_fraction") {
    c.fractions.validation = ctx.real(key, v);
  } else {
    ctx.fail("unknown training key '" + key + "'");
  }
}

void set_path(PathsConfig& p, const std::string& key, const std::string& v, const Ctx& ctx,
              const std::filesystem::path& base) {
  const auto r = resolve(base, v);
  if (key == "corpus") {
    p.corpus = r;
  } else if (key == "problems") {
    p.problems = r;
  } else if (key == "models") {
    p.models = r;
  } else if (key == "cache_dir" || key == "cache") {
    p.cache_dir = r;
  } else if (key == "catalog") {
    p.catalog = r;
  } else if (key == "attempt_log") {
    p.attempt_log = r;
  } else if (key == "webui") {
    p.webui = r;
  } else if (key == "output") {
    p.output = r;
  } else {
    ctx.fail("unknown paths key '" + key + "'");
  }
}

void set_server(ServerConfig& s, const std::string& key, const std::string& v, const Ctx& ctx,
                const std::filesystem::path& base) {
  if (key == "host") {
    s.host = v;
  } else if (key == "port") {
    s.port = ctx.integer<int>(key, v);
    if (s.port < 0 || s.port > 65535) ctx.fail("'port' must be in 0..65535");
  } else if (key == "provider") {
    s.provider = v;
  } else if (key == "max_attempts") {
    s.max_attempts = ctx.integer<std::uint32_t>(key, v);
  } else if (key == "max_body_bytes") {
    s.max_body_bytes = ctx.integer<std::size_t>(key, v);
  } else if (key == "roster") {
    s.roster = resolve(base, v);
  } else if (key == "threads") {
    s.threads = ctx.integer<unsigned>(key, v);
  } else {
    ctx.fail("unknown server key '" + key + "'");
  }
}

}  // namespace

const ProviderConfig& AppConfig::provider(std::string_view id) const {
  auto it = providers.find(id);
  if (it == providers.end()) {
    std::string known;
    for (const auto& [k, _] : providers) known += (known.empty() ? "" : ", ") + k;
    throw Error(ErrorKind::Config,
                "unknown provider '" + std::string(id) + "' (configured: " + known + ")");
  }
  return it->second;
}

ProviderConfig builtin_test_provider() {
  ProviderConfig p;
  p.provider_id = "test";
  p.kind = ProviderKind::DeterministicTest;
  p.dim = 256;
  p.needs_math_merge = true;
  return p;
}

AppConfig default_config() {
  AppConfig c;
  c.providers.emplace("test", builtin_test_provider());
  return c;
}

AppConfig parse_config(std::istream& in, std::string_view source_name,
                       const std::filesystem::path& base_dir) {
  AppConfig c = default_config();
  std::map<std::string, std::size_t, std::less<>> provider_line;
  std::string section;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    Ctx ctx{fmt::format("{}:{}", source_name, lineno)};
    std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']') ctx.fail("malformed section header");
      section = trim(std::string_view(t).substr(1, t.size() - 2));
      if (section != "providers" && section != "training" && section != "paths" &&
          section != "server")
        ctx.fail("unknown section [" + section + "]");
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) ctx.fail("expected 'key = value'");
    const std::string key = trim(std::string_view(t).substr(0, eq));
    const std::string value = unquote(trim(std::string_view(t).substr(eq + 1)));
    if (key.empty()) ctx.fail("empty key");
    if (section.empty()) ctx.fail("key '" + key + "' outside of any section");

    if (section == "providers") {
      const auto dot = key.find('.');
      if (dot == std::string::npos || dot == 0 || dot + 1 == key.size())
        ctx.fail("provider keys take the form <id>.<field>");
      const std::string id = key.substr(0, dot);
      auto& provider = c.providers[id];
      if (!provider_line.count(id)) {
        // A configured id replaces any built-in entry of the same name.
        provider = ProviderConfig{};
        provider.provider_id = id;
        provider_line[id] = lineno;
      }
      set_provider_field(provider, key.substr(dot + 1), value, ctx, base_dir);
    } else if (section == "training") {
      set_training(c, key, value, ctx);
    } else if (section == "paths") {
      set_path(c.paths, key, value, ctx, base_dir);
    } else {
      set_server(c.server, key, value, ctx, base_dir);
    }
  }
  for (const auto& [id, p] : c.providers) {
    try {
      p.validate();
    } catch (const Error& e) {
      auto ln = provider_line.find(id);
      const std::string where =
          ln == provider_line.end() ? std::string(source_name)
                                    : fmt::format("{}:{}", source_name, ln->second);
      throw Error(ErrorKind::Config, where + ": provider '" + id + "': " + e.what());
    }
  }
  try {
    c.training.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::Config, std::string(source_name) + ": [training]: " + e.what());
  }
  const double fsum = c.fractions.train + c.fractions.test + c.fractions.validation;
  if (std::abs(fsum - 1.0) > 1e-9)
    throw Error(ErrorKind::Config,
                std::string(source_name) + ": [training]: split fractions must sum to 1");
  return c;
}

AppConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::NotFound, "config file not found: " + path.string());
  return parse_config(in, path.string(), path.parent_path());
}

std::string describe_config(const AppConfig& c) {
  std::string out;
  out += "[providers]\n";
  for (const auto& [id, p] : c.providers) {
    out += fmt::format("{}.kind = {}\n{}.dim = {}\n{}.needs_math_merge = {}\n", id,
                       to_string(p.kind), id, p.dim, id, p.needs_math_merge);
    out += fmt::format("{}.max_batch = {}\n{}.max_in_flight = {}\n", id, p.max_batch, id,
                       p.max_in_flight);
    if (p.kind == ProviderKind::RemoteEndpoint)
      out += fmt::format("{}.endpoint_url = {}\n{}.model = {}\n{}.credential_env = {}\n"
                         "{}.max_retries = {}\n",
                         id, p.endpoint_url, id, p.model, id, p.credential_env, id,
                         p.max_retries);
    if (p.kind == ProviderKind::DeterministicTest) out += fmt::format("{}.seed = {}\n", id, p.seed);
    if (p.kind == ProviderKind::FileImport)
      out += fmt::format("{}.import_path = {}\n", id, p.import_path.string());
  }
  const auto& t = c.training;
  std::string grid;
  for (int e : t.epochs_grid) grid += (grid.empty() ? "" : ",") + std::to_string(e);
  out += fmt::format(
      "[training]\nbatch_size = {}\nepochs = {}\npeak_lr = {}\nwarmup_frac = {}\n"
      "decay_floor_frac = {}\nseed = {}\nselection_split = {}\ntrain_fraction = {}\n"
      "test_fraction = {}\nvalidation_fraction = {}\n",
      t.batch_size, grid, t.peak_lr, t.warmup_frac, t.decay_floor_frac, t.seed,
      t.selection_split == SelectionSplit::Test ? "test" : "validation", c.fractions.train,
      c.fractions.test, c.fractions.validation);
  return out;
}

}  // namespace proofgrade
