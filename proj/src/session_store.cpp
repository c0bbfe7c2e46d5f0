#include "hotprompt/session_store.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "hotprompt/error.hpp"

namespace hotprompt {
namespace {

constexpr int kStoreVersion = 1;
constexpr char kKeySeparator = '\x1f';

std::string normalize_part(std::string_view s) {
  auto first = std::find_if_not(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
  auto last = std::find_if_not(s.rbegin(), s.rend(), [](unsigned char c) { return std::isspace(c); }).base();
  std::string out = first < last ? std::string(first, last) : std::string();
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

nlohmann::json to_json(const ChatSession& s) {
  nlohmann::json exchanges = nlohmann::json::array();
  for (const auto& e : s.exchanges)
    exchanges.push_back({{"prompt", e.prompt}, {"response", e.response}, {"timestamp", e.timestamp}});
  return {{"app_name", s.key.app_name()},
          {"window_title", s.key.window_title()},
          {"backend_session_ref", s.backend_session_ref},
          {"created", s.created},
          {"last_used", s.last_used},
          {"exchanges", std::move(exchanges)}};
}

ChatSession from_json(const nlohmann::json& j) {
  ChatSession s;
  s.key = SessionKey(j.at("app_name").get<std::string>(), j.at("window_title").get<std::string>());
  s.backend_session_ref = j.at("backend_session_ref").get<std::string>();
  s.created = j.at("created").get<Millis>();
  s.last_used = j.at("last_used").get<Millis>();
  for (const auto& e : j.at("exchanges"))
    s.exchanges.push_back({e.at("prompt").get<std::string>(), e.at("response").get<std::string>(),
                           e.at("timestamp").get<Millis>()});
  return s;
}

void write_prefixed(std::ostream& out, std::string_view prefix, std::string_view text) {
  std::size_t start = 0;
  while (true) {
    std::size_t nl = text.find('\n', start);
    out << prefix << text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start)
        << '\n';
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
}

}  // namespace

SessionKey::SessionKey(std::string app_name, std::string window_title)
    : app_name_(std::move(app_name)), window_title_(std::move(window_title)) {
  normalized_ = normalize_part(app_name_);
  std::string title = normalize_part(window_title_);
  if (!title.empty()) {
    normalized_ += kKeySeparator;
    normalized_ += title;
  }
}

SessionStore::SessionStore(std::filesystem::path path) : path_(std::move(path)) {
  if (!path_.empty()) reload();
}

void SessionStore::reload() {
  sessions_.clear();
  if (path_.empty() || !std::filesystem::exists(path_)) return;
  std::ifstream in(path_, std::ios::binary);
  if (!in) throw Error(ErrorCode::StoreUnavailable, "cannot read " + path_.string());
  try {
    nlohmann::json doc = nlohmann::json::parse(in);
    if (doc.at("version").get<int>() != kStoreVersion)
      throw Error(ErrorCode::StoreUnavailable, "unsupported store version in " + path_.string());
    for (const auto& j : doc.at("sessions")) sessions_.push_back(from_json(j));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::StoreUnavailable, "corrupt store " + path_.string() + ": " + e.what());
  }
}

std::string SessionStore::serialize() const {
  nlohmann::json sessions = nlohmann::json::array();
  for (const auto& s : sessions_) sessions.push_back(to_json(s));
  return nlohmann::json{{"version", kStoreVersion}, {"sessions", std::move(sessions)}}.dump(2) + "\n";
}

void SessionStore::save() {
  if (path_.empty()) return;
  std::filesystem::path tmp = path_;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::StoreUnavailable, "cannot write " + tmp.string());
    out << serialize();
    out.flush();
    if (!out) throw Error(ErrorCode::StoreUnavailable, "short write to " + tmp.string());
  }
  if (fault_ == FaultPoint::BeforeRename) {
    fault_ = FaultPoint::None;
    throw Error(ErrorCode::StoreUnavailable, "injected crash before rename");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path_, ec);
  if (ec) throw Error(ErrorCode::StoreUnavailable, "rename failed: " + ec.message());
}

ChatSession* SessionStore::find_mut(const SessionKey& key) {
  auto it = std::find_if(sessions_.begin(), sessions_.end(),
                         [&](const ChatSession& s) { return s.key == key; });
  return it == sessions_.end() ? nullptr : &*it;
}

std::optional<ChatSession> SessionStore::find(const SessionKey& key) const {
  auto it = std::find_if(sessions_.begin(), sessions_.end(),
                         [&](const ChatSession& s) { return s.key == key; });
  if (it == sessions_.end()) return std::nullopt;
  return *it;
}

std::pair<ChatSession, bool> SessionStore::lookup_or_create(const SessionKey& key, Millis now) {
  if (const ChatSession* s = find_mut(key)) return {*s, false};
  ChatSession session;
  session.key = key;
  session.created = now;
  session.last_used = now;
  sessions_.push_back(session);
  try {
    save();
  } catch (...) {
    sessions_.pop_back();
    throw;
  }
  return {session, true};
}

ChatSession SessionStore::append_exchange(const SessionKey& key, std::string prompt,
                                          std::string response, Millis now) {
  ChatSession* s = find_mut(key);
  if (!s) {
    lookup_or_create(key, now);
    s = find_mut(key);
  }
  const ChatSession before = *s;
  s->exchanges.push_back({std::move(prompt), std::move(response), now});
  s->last_used = std::max(s->last_used, now);
  try {
    save();
  } catch (...) {
    *find_mut(key) = before;
    throw;
  }
  return *find_mut(key);
}

ChatSession SessionStore::set_backend_ref(const SessionKey& key, std::string ref) {
  ChatSession* s = find_mut(key);
  if (!s) throw Error(ErrorCode::StoreUnavailable, "no session for key");
  if (s->backend_session_ref == ref) return *s;
  if (!s->backend_session_ref.empty())
    throw Error(ErrorCode::StoreUnavailable, "backend ref already assigned for session");
  s->backend_session_ref = std::move(ref);
  try {
    save();
  } catch (...) {
    find_mut(key)->backend_session_ref.clear();
    throw;
  }
  return *find_mut(key);
}

std::size_t SessionStore::evict(Millis before) {
  const auto old = sessions_;
  const auto removed = std::erase_if(sessions_, [&](const ChatSession& s) { return s.last_used < before; });
  if (removed > 0) {
    try {
      save();
    } catch (...) {
      sessions_ = old;
      throw;
    }
  }
  return removed;
}

std::string SessionStore::export_text() const {
  std::ostringstream out;
  out << "# hotprompt session export v" << kStoreVersion << '\n';
  for (const auto& s : sessions_) {
    out << "session\n";
    out << "app: " << s.key.app_name() << '\n';
    out << "title: " << s.key.window_title() << '\n';
    out << "ref: " << s.backend_session_ref << '\n';
    out << "created: " << s.created << '\n';
    out << "last_used: " << s.last_used << '\n';
    for (const auto& e : s.exchanges) {
      out << "exchange: " << e.timestamp << '\n';
      write_prefixed(out, "> ", e.prompt);
      write_prefixed(out, "< ", e.response);
    }
    out << "end\n";
  }
  return out.str();
}

}  // namespace hotprompt
