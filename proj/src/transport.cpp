#include "chargescope/transport.hpp"

#include <algorithm>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <mutex>

namespace chargescope {

namespace {

// One direction of an in-process channel.
class Mailbox {
 public:
  void push(Bytes item) {
    {
      std::lock_guard lock(mu_);
      if (closed_) return;
      items_.push_back(std::move(item));
    }
    cv_.notify_all();
  }

  // Blocks until an item arrives, the mailbox closes, or the deadline passes.
  // `closed_out` reports whether emptiness is permanent.
  std::optional<Bytes> pop(Clock::time_point deadline, bool& closed_out) {
    std::unique_lock lock(mu_);
    cv_.wait_until(lock, deadline, [&] { return !items_.empty() || closed_; });
    closed_out = closed_ && items_.empty();
    if (items_.empty()) return std::nullopt;
    Bytes item = std::move(items_.front());
    items_.pop_front();
    return item;
  }

  void close() {
    {
      std::lock_guard lock(mu_);
      closed_ = true;
    }
    cv_.notify_all();
  }

  bool closed() {
    std::lock_guard lock(mu_);
    return closed_;
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Bytes> items_;
  bool closed_ = false;
};

struct Duplex {
  Mailbox a_to_b;
  Mailbox b_to_a;
};

class InProcessChannel final : public MessageChannel {
 public:
  InProcessChannel(std::shared_ptr<Duplex> duplex, bool is_a, DropFilter drop)
      : duplex_(std::move(duplex)), is_a_(is_a), drop_(std::move(drop)) {}
  ~InProcessChannel() override { close(); }

  void send(ByteView message) override {
    if (drop_ && drop_(message)) return;
    outbox().push(Bytes(message.begin(), message.end()));
  }

  std::optional<Bytes> receive(Clock::time_point deadline) override {
    bool closed = false;
    return inbox().pop(deadline, closed);
  }

  void close() override {
    outbox().close();
    inbox().close();
  }

 private:
  Mailbox& outbox() { return is_a_ ? duplex_->a_to_b : duplex_->b_to_a; }
  Mailbox& inbox() { return is_a_ ? duplex_->b_to_a : duplex_->a_to_b; }

  std::shared_ptr<Duplex> duplex_;
  bool is_a_;
  DropFilter drop_;
};

class InProcessStream final : public ByteStream {
 public:
  InProcessStream(std::shared_ptr<Duplex> duplex, bool is_a)
      : duplex_(std::move(duplex)), is_a_(is_a) {}
  ~InProcessStream() override { close(); }

  void write(ByteView data) override {
    if (outbox().closed()) throw TransportError("stream closed");
    if (!data.empty()) outbox().push(Bytes(data.begin(), data.end()));
  }

  ReadResult read(std::span<std::uint8_t> out, Clock::time_point deadline) override {
    if (out.empty()) return {};
    if (pending_pos_ >= pending_.size()) {
      bool closed = false;
      auto chunk = inbox().pop(deadline, closed);
      if (!chunk) return {closed ? ReadStatus::eof : ReadStatus::timeout, 0};
      pending_ = std::move(*chunk);
      pending_pos_ = 0;
    }
    std::size_t n = std::min(out.size(), pending_.size() - pending_pos_);
    std::memcpy(out.data(), pending_.data() + pending_pos_, n);
    pending_pos_ += n;
    return {ReadStatus::ok, n};
  }

  // Data already queued for the peer is still delivered before EOF.
  void close() override {
    outbox().close();
    inbox().close();
  }

 private:
  Mailbox& outbox() { return is_a_ ? duplex_->a_to_b : duplex_->b_to_a; }
  Mailbox& inbox() { return is_a_ ? duplex_->b_to_a : duplex_->a_to_b; }

  std::shared_ptr<Duplex> duplex_;
  bool is_a_;
  Bytes pending_;
  std::size_t pending_pos_ = 0;
};

}  // namespace

ReadStatus read_exact(ByteStream& stream, std::span<std::uint8_t> out,
                      Clock::time_point deadline) {
  std::size_t got = 0;
  while (got < out.size()) {
    auto r = stream.read(out.subspan(got), deadline);
    if (r.status != ReadStatus::ok) return r.status;
    got += r.size;
  }
  return ReadStatus::ok;
}

std::pair<std::unique_ptr<MessageChannel>, std::unique_ptr<MessageChannel>>
make_in_process_channel_pair(DropFilter a_to_b, DropFilter b_to_a) {
  auto duplex = std::make_shared<Duplex>();
  return {std::make_unique<InProcessChannel>(duplex, true, std::move(a_to_b)),
          std::make_unique<InProcessChannel>(duplex, false, std::move(b_to_a))};
}

std::pair<std::unique_ptr<ByteStream>, std::unique_ptr<ByteStream>> make_in_process_stream_pair() {
  auto duplex = std::make_shared<Duplex>();
  return {std::make_unique<InProcessStream>(duplex, true),
          std::make_unique<InProcessStream>(duplex, false)};
}

}  // namespace chargescope
