#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hotprompt {

/// Browser native-messaging limits: what the host may send, and the most it accepts.
inline constexpr std::size_t kMaxOutboundFrame = std::size_t{1} << 20;
inline constexpr std::size_t kMaxInboundFrame = std::size_t{4} << 20;
inline constexpr int kProtocolVersion = 1;

enum class MessageType {
  Hello,
  ExtractSelection,
  SelectionResult,
  InsertText,
  InsertAck,
  OpenChat,
  SubmitQuery,
  ResponseChunk,
  ResponseDone,
  ResponseFailed,
  EditabilityResult,
  RediscoveryFailed,
  PickElements,
  SelectorsUpdated,
  Error,
  // Popup and in-browser trigger traffic.
  Trigger,
  MenuOpen,
  MenuUpdate,
  MenuClose,
  UserAction,
  Cancel,
  Shutdown,
};

std::string_view to_string(MessageType type) noexcept;
std::optional<MessageType> parse_message_type(std::string_view name) noexcept;
const std::vector<MessageType>& all_message_types();

/// Wire payload: {"type": <name>, "id": <correlation id>, "body": {...}}.
/// `type` stays a string so unknown names survive decoding and can be answered.
struct BridgeMessage {
  std::string type;
  std::string id;
  nlohmann::json body = nlohmann::json::object();

  static BridgeMessage make(MessageType type, std::string id, nlohmann::json body = nlohmann::json::object());
  std::optional<MessageType> kind() const { return parse_message_type(type); }

  friend bool operator==(const BridgeMessage&, const BridgeMessage&) = default;
};

/// Response type a request expects, or nullopt for notifications.
/// Error is an additional terminal reply to any request.
std::optional<MessageType> response_type(MessageType request) noexcept;
/// True when `reply` ends the exchange started by `request`.
bool is_terminal_reply(MessageType request, MessageType reply) noexcept;

std::string encode_payload(const BridgeMessage& message);
/// Throws Error{ProtocolError} unless `payload` is exactly one well-formed message.
BridgeMessage decode_payload(std::string_view payload);

/// 4-byte little-endian length followed by the payload. Throws Error{TooLarge}.
std::string frame_bytes(std::string_view payload, std::size_t limit = kMaxOutboundFrame);
std::string frame_encode(const BridgeMessage& message, std::size_t limit = kMaxOutboundFrame);

/// Incremental decoder. Partial frames are buffered across feed() calls; any
/// protocol violation closes the decoder for good.
class FrameDecoder {
 public:
  explicit FrameDecoder(std::size_t limit = kMaxInboundFrame) : limit_(limit) {}

  /// Throws Error{ProtocolError} (and closes) on oversize or unparsable frames,
  /// Error{ChannelClosed} once closed.
  std::vector<BridgeMessage> feed(std::string_view bytes);

  bool closed() const { return closed_; }
  std::size_t buffered() const { return buffer_.size(); }

 private:
  std::size_t limit_;
  std::string buffer_;
  bool closed_ = false;
};

/// One side of a bridge channel: handshake, routing by type, and correlation
/// of replies to outstanding requests. Bytes go out through `writer`; inbound
/// bytes are pushed in with receive_bytes().
class BridgeEndpoint {
 public:
  using Writer = std::function<void(std::string bytes)>;
  using Handler = std::function<void(const BridgeMessage&)>;

  BridgeEndpoint(std::string name, Writer writer);

  void on(MessageType type, Handler handler);

  /// Frames and writes. Throws Error{ChannelClosed} / Error{TooLarge}.
  void send(const BridgeMessage& message);
  void reply(const BridgeMessage& request, MessageType type, nlohmann::json body = nlohmann::json::object());
  void reply_error(const BridgeMessage& request, std::string_view code, std::string_view detail);

  /// Sends a request and routes every reply with the same id to `on_reply`
  /// until a terminal one arrives. Assigns an id when the message has none.
  std::string request(BridgeMessage message, Handler on_reply);

  /// Sends our Hello; the peer's Hello completes the handshake.
  void hello(nlohmann::json extra = nlohmann::json::object());

  /// Decodes and dispatches. A ProtocolError closes the channel and rethrows.
  void receive_bytes(std::string_view bytes);

  /// Routes one decoded message. Throws Error{VersionMismatch} (after replying
  /// and closing) on an incompatible Hello.
  void dispatch(const BridgeMessage& message);

  /// Fails every outstanding request with a synthetic Error reply and closes.
  void close(std::string_view reason = "closed");

  bool handshaken() const;
  bool closed() const;
  std::size_t pending_requests() const;
  const nlohmann::json& peer_hello() const { return peer_hello_; }

 private:
  std::string next_id();

  std::string name_;
  Writer writer_;
  FrameDecoder decoder_;
  mutable std::mutex mutex_;
  std::map<MessageType, Handler> handlers_;
  struct Pending {
    MessageType type;
    Handler on_reply;
  };
  std::map<std::string, Pending> pending_;
  nlohmann::json peer_hello_;
  bool sent_hello_ = false;
  bool handshaken_ = false;
  bool closed_ = false;
  std::uint64_t counter_ = 0;
};

}  // namespace hotprompt
