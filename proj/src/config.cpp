#include "hotprompt/config.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cctype>
#include <fstream>
#include <sstream>

#include "hotprompt/error.hpp"

namespace hotprompt {
namespace pt = boost::property_tree;

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorCode::ConfigInvalid, what); }

bool parse_bool(const std::string& key, const std::string& value) {
  auto v = lower(trim(value));
  if (v == "true" || v == "yes" || v == "1" || v == "on") return true;
  if (v == "false" || v == "no" || v == "0" || v == "off") return false;
  invalid(key + ": expected a boolean, got '" + value + "'");
}

long long parse_int(const std::string& key, const std::string& value, long long min) {
  auto v = trim(value);
  std::size_t used = 0;
  long long n = 0;
  try {
    n = std::stoll(v, &used);
  } catch (const std::exception&) {
    invalid(key + ": expected an integer, got '" + value + "'");
  }
  if (used != v.size()) invalid(key + ": expected an integer, got '" + value + "'");
  if (n < min) invalid(key + ": must be >= " + std::to_string(min));
  return n;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& value) {
  auto v = trim(value);
  if (v.empty()) return {};
  std::filesystem::path p(v);
  if (p.is_relative() && !base.empty()) p = base / p;
  return p;
}

const pt::ptree* section(const pt::ptree& tree, const std::string& name) {
  auto it = tree.find(name);
  return it == tree.not_found() ? nullptr : &it->second;
}

std::optional<std::string> value(const pt::ptree* sec, const std::string& key) {
  if (!sec) return std::nullopt;
  auto it = sec->find(key);
  if (it == sec->not_found()) return std::nullopt;
  return it->second.data();
}

void reject_unknown(const pt::ptree* sec, const std::string& name, std::initializer_list<std::string_view> known) {
  if (!sec) return;
  for (const auto& [key, _] : *sec)
    if (std::find(known.begin(), known.end(), key) == known.end()) invalid("unknown key [" + name + "] " + key);
}

}  // namespace

std::string_view to_string(Modifier m) noexcept {
  switch (m) {
    case Modifier::Ctrl: return "Ctrl";
    case Modifier::Alt: return "Alt";
    case Modifier::Shift: return "Shift";
    case Modifier::Super: return "Super";
  }
  return "?";
}

HotkeyBinding HotkeyBinding::parse(std::string_view text) {
  HotkeyBinding b;
  std::vector<std::string> parts;
  std::string cur;
  for (char c : text) {
    if (c == '+') {
      parts.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  parts.push_back(trim(cur));
  if (trim(text).empty()) invalid("empty hotkey binding");
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    auto m = lower(parts[i]);
    if (m == "ctrl" || m == "control") b.modifiers.insert(Modifier::Ctrl);
    else if (m == "alt") b.modifiers.insert(Modifier::Alt);
    else if (m == "shift") b.modifiers.insert(Modifier::Shift);
    else if (m == "super" || m == "win" || m == "meta" || m == "cmd") b.modifiers.insert(Modifier::Super);
    else invalid("unknown modifier '" + parts[i] + "' in hotkey '" + std::string(text) + "'");
  }
  b.key = parts.back();
  if (b.key.empty()) invalid("hotkey '" + std::string(text) + "' has no key");
  if (b.key.size() == 1) b.key[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(b.key[0])));
  return b;
}

std::string HotkeyBinding::describe() const {
  std::string out;
  for (auto m : modifiers) {  // std::set orders by enum value
    out += to_string(m);
    out += '+';
  }
  return out + key;
}

std::string_view to_string(BackendKind kind) noexcept {
  switch (kind) {
    case BackendKind::Api: return "api";
    case BackendKind::Relay: return "relay";
    case BackendKind::Mock: return "mock";
  }
  return "?";
}

BackendKind parse_backend_kind(std::string_view name) {
  auto n = lower(trim(name));
  if (n == "api") return BackendKind::Api;
  if (n == "relay") return BackendKind::Relay;
  if (n == "mock") return BackendKind::Mock;
  invalid("unknown backend '" + std::string(name) + "'");
}

ServiceConfig ServiceConfig::parse_ini(std::string_view text, const std::filesystem::path& base_dir) {
  pt::ptree tree;
  try {
    std::istringstream in{std::string(text)};
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    invalid(std::string("config syntax: ") + e.what());
  }

  ServiceConfig cfg;
  const auto* svc = section(tree, "service");
  reject_unknown(svc, "service",
                 {"hotkey", "backend", "include_context", "context_limit", "capture_timeout_ms", "store",
                  "session_ttl_ms", "diff", "lock_dir", "ui_socket"});
  if (auto v = value(svc, "hotkey")) {
    cfg.hotkeys.clear();
    std::string cur;
    std::stringstream ss(*v);
    while (std::getline(ss, cur, ',')) cfg.hotkeys.push_back(HotkeyBinding::parse(cur));
    if (cfg.hotkeys.empty()) invalid("empty hotkey binding");
  }
  if (auto v = value(svc, "backend")) cfg.backend = parse_backend_kind(*v);
  if (auto v = value(svc, "include_context")) cfg.include_context = parse_bool("include_context", *v);
  if (auto v = value(svc, "context_limit"))
    cfg.context_limit = static_cast<std::size_t>(parse_int("context_limit", *v, 1));
  if (auto v = value(svc, "capture_timeout_ms"))
    cfg.capture_timeout = std::chrono::milliseconds(parse_int("capture_timeout_ms", *v, 1));
  if (auto v = value(svc, "store")) cfg.store_path = resolve(base_dir, *v);
  if (auto v = value(svc, "session_ttl_ms")) cfg.session_ttl_ms = parse_int("session_ttl_ms", *v, 0);
  if (auto v = value(svc, "diff")) {
    auto d = lower(trim(*v));
    if (d == "word") cfg.diff_granularity = Granularity::Word;
    else if (d == "character" || d == "char") cfg.diff_granularity = Granularity::Character;
    else invalid("diff: expected word or character");
  }
  if (auto v = value(svc, "lock_dir")) cfg.lock_dir = resolve(base_dir, *v);
  if (auto v = value(svc, "ui_socket")) cfg.ui_socket = resolve(base_dir, *v);

  const auto* q = section(tree, "quiescence");
  reject_unknown(q, "quiescence", {"window_ms", "hard_timeout_ms"});
  if (auto v = value(q, "window_ms")) cfg.quiescence.window = parse_int("window_ms", *v, 1);
  if (auto v = value(q, "hard_timeout_ms")) cfg.quiescence.hard_timeout = parse_int("hard_timeout_ms", *v, 1);

  const auto* qa = section(tree, "quick_actions");
  reject_unknown(qa, "quick_actions", {"language"});
  if (auto v = value(qa, "language")) cfg.quick_actions.set_target_language(trim(*v));
  for (const auto& [name, sec] : tree) {
    if (name.rfind("quick.", 0) != 0) continue;
    reject_unknown(&sec, name, {"label", "template"});
    int slot = static_cast<int>(parse_int(name, name.substr(6), 1));
    auto label = value(&sec, "label");
    auto tmpl = value(&sec, "template");
    if (!tmpl || trim(*tmpl).empty()) invalid("[" + name + "] needs a template");
    cfg.quick_actions.set({slot, label ? trim(*label) : "slot " + std::to_string(slot), trim(*tmpl)});
  }

  const auto* api = section(tree, "api");
  reject_unknown(api, "api", {"base_url", "model", "key_env", "read_timeout_ms"});
  if (auto v = value(api, "base_url")) cfg.api.base_url = trim(*v);
  if (auto v = value(api, "model")) cfg.api.model = trim(*v);
  if (auto v = value(api, "key_env")) cfg.api.key_env = trim(*v);
  if (auto v = value(api, "read_timeout_ms")) cfg.api.read_timeout_ms = parse_int("read_timeout_ms", *v, 1);

  const auto* relay = section(tree, "relay");
  reject_unknown(relay, "relay", {"home_url"});
  if (auto v = value(relay, "home_url")) cfg.relay_home_url = trim(*v);

  const auto* mock = section(tree, "mock");
  reject_unknown(mock, "mock", {"scenario"});
  if (auto v = value(mock, "scenario")) cfg.mock_scenario = resolve(base_dir, *v);

  const auto* sim = section(tree, "simulated");
  reject_unknown(sim, "simulated", {"fixture"});
  if (auto v = value(sim, "fixture")) cfg.fixture = resolve(base_dir, *v);

  for (const auto& [name, _] : tree) {
    static const std::vector<std::string> known{"service", "quiescence", "quick_actions", "api",
                                                "relay",   "mock",       "simulated"};
    if (name.rfind("quick.", 0) != 0 && std::find(known.begin(), known.end(), name) == known.end())
      invalid("unknown section [" + name + "]");
  }

  cfg.validate();
  return cfg;
}

ServiceConfig ServiceConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) invalid("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_ini(ss.str(), path.parent_path());
}

void ServiceConfig::validate() const {
  if (hotkeys.empty()) invalid("empty hotkey binding");
  for (const auto& h : hotkeys)
    if (h.key.empty()) invalid("empty hotkey binding");
  if (context_limit == 0) invalid("context_limit must be positive");
  if (capture_timeout.count() <= 0) invalid("capture_timeout_ms must be positive");
  if (quick_actions.actions().empty()) invalid("no quick actions configured");
  quiescence.validate();
  if (backend == BackendKind::Api && api.base_url.empty()) invalid("api backend needs [api] base_url");
}

std::filesystem::path default_lock_dir() {
  if (const char* d = std::getenv("XDG_RUNTIME_DIR"); d && *d) return d;
  return std::filesystem::temp_directory_path();
}

HotkeyRegistration::HotkeyRegistration(const HotkeyBinding& binding, const std::filesystem::path& lock_dir)
    : binding_(binding) {
  std::string name = "hotprompt-hotkey-";
  for (char c : binding.describe())
    name += std::isalnum(static_cast<unsigned char>(c)) ? c : '_';
  auto dir = lock_dir.empty() ? default_lock_dir() : lock_dir;
  path_ = dir / (name + ".lock");
  fd_ = ::open(path_.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0600);
  if (fd_ < 0)
    throw Error(ErrorCode::HotkeyUnavailable, "cannot open " + path_.string() + " for " + binding.describe());
  if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
    ::close(fd_);
    fd_ = -1;
    throw Error(ErrorCode::HotkeyUnavailable, binding.describe() + " is already registered");
  }
}

HotkeyRegistration::HotkeyRegistration(HotkeyRegistration&& other) noexcept
    : binding_(std::move(other.binding_)), path_(std::move(other.path_)), fd_(std::exchange(other.fd_, -1)) {}

HotkeyRegistration::~HotkeyRegistration() {
  if (fd_ >= 0) ::close(fd_);
}

}  // namespace hotprompt
