#include "hotprompt/bridge.hpp"

#include <array>

#include "hotprompt/error.hpp"

namespace hotprompt {
namespace {

struct TypeName {
  MessageType type;
  std::string_view name;
};

constexpr std::array kTypeNames{
    TypeName{MessageType::Hello, "Hello"},
    TypeName{MessageType::ExtractSelection, "ExtractSelection"},
    TypeName{MessageType::SelectionResult, "SelectionResult"},
    TypeName{MessageType::InsertText, "InsertText"},
    TypeName{MessageType::InsertAck, "InsertAck"},
    TypeName{MessageType::OpenChat, "OpenChat"},
    TypeName{MessageType::SubmitQuery, "SubmitQuery"},
    TypeName{MessageType::ResponseChunk, "ResponseChunk"},
    TypeName{MessageType::ResponseDone, "ResponseDone"},
    TypeName{MessageType::ResponseFailed, "ResponseFailed"},
    TypeName{MessageType::EditabilityResult, "EditabilityResult"},
    TypeName{MessageType::RediscoveryFailed, "RediscoveryFailed"},
    TypeName{MessageType::PickElements, "PickElements"},
    TypeName{MessageType::SelectorsUpdated, "SelectorsUpdated"},
    TypeName{MessageType::Error, "Error"},
    TypeName{MessageType::Trigger, "Trigger"},
    TypeName{MessageType::MenuOpen, "MenuOpen"},
    TypeName{MessageType::MenuUpdate, "MenuUpdate"},
    TypeName{MessageType::MenuClose, "MenuClose"},
    TypeName{MessageType::UserAction, "UserAction"},
    TypeName{MessageType::Cancel, "Cancel"},
    TypeName{MessageType::Shutdown, "Shutdown"},
};

}  // namespace

std::string_view to_string(MessageType type) noexcept {
  for (const auto& t : kTypeNames)
    if (t.type == type) return t.name;
  return "Error";
}

std::optional<MessageType> parse_message_type(std::string_view name) noexcept {
  for (const auto& t : kTypeNames)
    if (t.name == name) return t.type;
  return std::nullopt;
}

const std::vector<MessageType>& all_message_types() {
  static const std::vector<MessageType> types = [] {
    std::vector<MessageType> v;
    for (const auto& t : kTypeNames) v.push_back(t.type);
    return v;
  }();
  return types;
}

BridgeMessage BridgeMessage::make(MessageType type, std::string id, nlohmann::json body) {
  return {std::string(to_string(type)), std::move(id), std::move(body)};
}

std::optional<MessageType> response_type(MessageType request) noexcept {
  switch (request) {
    case MessageType::Hello: return MessageType::Hello;
    case MessageType::ExtractSelection: return MessageType::SelectionResult;
    case MessageType::InsertText: return MessageType::InsertAck;
    case MessageType::SubmitQuery: return MessageType::ResponseDone;
    case MessageType::PickElements: return MessageType::SelectorsUpdated;
    default: return std::nullopt;
  }
}

bool is_terminal_reply(MessageType request, MessageType reply) noexcept {
  if (reply == MessageType::Error) return true;
  if (request == MessageType::SubmitQuery)
    return reply == MessageType::ResponseDone || reply == MessageType::ResponseFailed ||
           reply == MessageType::RediscoveryFailed;
  auto expected = response_type(request);
  return expected && *expected == reply;
}

std::string encode_payload(const BridgeMessage& message) {
  if (!message.body.is_object()) throw Error(ErrorCode::ProtocolError, "body must be an object");
  nlohmann::json j{{"type", message.type}, {"id", message.id}, {"body", message.body}};
  try {
    return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::strict);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ProtocolError, std::string("message is not valid UTF-8: ") + e.what());
  }
}

BridgeMessage decode_payload(std::string_view payload) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(payload);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ProtocolError, std::string("unparsable payload: ") + e.what());
  }
  if (!j.is_object() || !j.contains("type") || !j["type"].is_string())
    throw Error(ErrorCode::ProtocolError, "payload is not a message object");
  BridgeMessage m;
  m.type = j["type"].get<std::string>();
  if (j.contains("id")) {
    if (!j["id"].is_string()) throw Error(ErrorCode::ProtocolError, "id must be a string");
    m.id = j["id"].get<std::string>();
  }
  if (j.contains("body")) {
    if (!j["body"].is_object()) throw Error(ErrorCode::ProtocolError, "body must be an object");
    m.body = std::move(j["body"]);
  }
  return m;
}

std::string frame_bytes(std::string_view payload, std::size_t limit) {
  if (payload.size() > limit)
    throw Error(ErrorCode::TooLarge, std::to_string(payload.size()) + " byte payload exceeds " +
                                         std::to_string(limit));
  const auto n = static_cast<std::uint32_t>(payload.size());
  std::string out;
  out.reserve(4 + payload.size());
  for (int shift = 0; shift < 32; shift += 8) out.push_back(static_cast<char>((n >> shift) & 0xFF));
  out.append(payload);
  return out;
}

std::string frame_encode(const BridgeMessage& message, std::size_t limit) {
  return frame_bytes(encode_payload(message), limit);
}

std::vector<BridgeMessage> FrameDecoder::feed(std::string_view bytes) {
  if (closed_) throw Error(ErrorCode::ChannelClosed, "decoder closed after protocol error");
  buffer_.append(bytes);
  std::vector<BridgeMessage> out;
  std::size_t pos = 0;
  try {
    while (buffer_.size() - pos >= 4) {
      std::uint32_t n = 0;
      for (int i = 0; i < 4; ++i)
        n |= static_cast<std::uint32_t>(static_cast<unsigned char>(buffer_[pos + i])) << (8 * i);
      if (n > limit_)
        throw Error(ErrorCode::ProtocolError,
                    "frame length " + std::to_string(n) + " exceeds " + std::to_string(limit_));
      if (buffer_.size() - pos - 4 < n) break;
      out.push_back(decode_payload(std::string_view(buffer_).substr(pos + 4, n)));
      pos += 4 + n;
    }
  } catch (...) {
    closed_ = true;
    buffer_.clear();
    throw;
  }
  buffer_.erase(0, pos);
  return out;
}

BridgeEndpoint::BridgeEndpoint(std::string name, Writer writer)
    : name_(std::move(name)), writer_(std::move(writer)) {}

void BridgeEndpoint::on(MessageType type, Handler handler) {
  std::lock_guard lock(mutex_);
  handlers_[type] = std::move(handler);
}

void BridgeEndpoint::send(const BridgeMessage& message) {
  std::string bytes = frame_encode(message);
  std::lock_guard lock(mutex_);
  if (closed_) throw Error(ErrorCode::ChannelClosed, name_ + " channel is closed");
  writer_(std::move(bytes));
}

void BridgeEndpoint::reply(const BridgeMessage& request, MessageType type, nlohmann::json body) {
  send(BridgeMessage::make(type, request.id, std::move(body)));
}

void BridgeEndpoint::reply_error(const BridgeMessage& request, std::string_view code, std::string_view detail) {
  reply(request, MessageType::Error, {{"code", code}, {"detail", detail}, {"request_type", request.type}});
}

std::string BridgeEndpoint::next_id() {
  return name_ + "-" + std::to_string(++counter_);
}

std::string BridgeEndpoint::request(BridgeMessage message, Handler on_reply) {
  auto kind = message.kind();
  if (!kind) throw Error(ErrorCode::ProtocolError, "cannot issue request of unknown type " + message.type);
  {
    std::lock_guard lock(mutex_);
    if (message.id.empty()) message.id = next_id();
    pending_[message.id] = Pending{*kind, std::move(on_reply)};
  }
  try {
    send(message);
  } catch (...) {
    std::lock_guard lock(mutex_);
    pending_.erase(message.id);
    throw;
  }
  return message.id;
}

void BridgeEndpoint::hello(nlohmann::json extra) {
  extra["version"] = kProtocolVersion;
  std::string id;
  {
    std::lock_guard lock(mutex_);
    id = next_id();
    sent_hello_ = true;
  }
  send(BridgeMessage::make(MessageType::Hello, id, std::move(extra)));
}

void BridgeEndpoint::receive_bytes(std::string_view bytes) {
  std::vector<BridgeMessage> messages;
  try {
    messages = decoder_.feed(bytes);
  } catch (const Error& e) {
    close(e.what());
    throw;
  }
  for (const auto& m : messages) dispatch(m);
}

void BridgeEndpoint::dispatch(const BridgeMessage& message) {
  if (closed()) throw Error(ErrorCode::ChannelClosed, name_ + " channel is closed");
  const auto kind = message.kind();

  // Replies to our own requests.
  Handler reply_handler;
  {
    std::lock_guard lock(mutex_);
    if (auto it = pending_.find(message.id); it != pending_.end() && kind &&
                                             !(kind == MessageType::Hello && !sent_hello_)) {
      reply_handler = it->second.on_reply;
      if (is_terminal_reply(it->second.type, *kind)) pending_.erase(it);
    }
  }

  if (kind == MessageType::Hello) {
    const auto& version = message.body.contains("version") ? message.body["version"] : nlohmann::json();
    if (!version.is_number_integer() || version.get<int>() != kProtocolVersion) {
      reply_error(message, "version-mismatch",
                  "expected protocol version " + std::to_string(kProtocolVersion));
      close("version mismatch");
      throw Error(ErrorCode::VersionMismatch, "peer sent protocol version " + version.dump());
    }
    bool answer = false;
    {
      std::lock_guard lock(mutex_);
      peer_hello_ = message.body;
      handshaken_ = true;
      answer = !sent_hello_;
      sent_hello_ = true;
    }
    if (answer) reply(message, MessageType::Hello, {{"version", kProtocolVersion}});
    if (reply_handler) reply_handler(message);
    return;
  }

  if (!handshaken()) {
    if (reply_handler) {
      reply_handler(message);
    } else if (kind != MessageType::Error) {
      reply_error(message, "not-handshaken", "send Hello first");
    }
    return;
  }
  if (!kind) {
    reply_error(message, "unknown-type", message.type);
    return;
  }
  if (reply_handler) {
    reply_handler(message);
    return;
  }

  Handler handler;
  {
    std::lock_guard lock(mutex_);
    if (auto it = handlers_.find(*kind); it != handlers_.end()) handler = it->second;
  }
  if (handler) {
    handler(message);
  } else if (response_type(*kind)) {
    reply_error(message, "unsupported", message.type);
  }
  // Unsolicited replies and notifications without a handler are dropped.
}

void BridgeEndpoint::close(std::string_view reason) {
  std::map<std::string, Pending> pending;
  {
    std::lock_guard lock(mutex_);
    if (closed_) return;
    closed_ = true;
    pending.swap(pending_);
  }
  for (auto& [id, p] : pending) {
    if (p.on_reply)
      p.on_reply(BridgeMessage::make(MessageType::Error, id,
                                     {{"code", "channel-closed"}, {"detail", reason}}));
  }
}

bool BridgeEndpoint::handshaken() const {
  std::lock_guard lock(mutex_);
  return handshaken_;
}

bool BridgeEndpoint::closed() const {
  std::lock_guard lock(mutex_);
  return closed_;
}

std::size_t BridgeEndpoint::pending_requests() const {
  std::lock_guard lock(mutex_);
  return pending_.size();
}

}  // namespace hotprompt
