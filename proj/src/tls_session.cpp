#include <array>
#include <cstring>
#include <fstream>

#include "chargescope/tls.hpp"
#include "ossl.hpp"

namespace chargescope::tls {

using namespace ossl;

std::string to_string(FailureStage s) {
  switch (s) {
    case FailureStage::tcp_connect: return "tcp_connect";
    case FailureStage::hello: return "hello";
    case FailureStage::certificate: return "certificate";
    case FailureStage::alert: return "alert";
    case FailureStage::timeout: return "timeout";
  }
  return "?";
}

namespace {

// What the message callback observed from the peer during the handshake.
struct Observed {
  bool peer_bytes = false;
  bool certificate = false;
  bool alert = false;
};

void on_message(int write_p, int, int content_type, const void* buf, std::size_t len, SSL*,
                void* arg) {
  if (write_p) return;
  auto* o = static_cast<Observed*>(arg);
  if (content_type == SSL3_RT_ALERT) o->alert = true;
  if (content_type == SSL3_RT_HANDSHAKE && len > 0 &&
      static_cast<const unsigned char*>(buf)[0] == SSL3_MT_CERTIFICATE) {
    o->certificate = true;
  }
}

std::string describe_records(ByteView data) {
  std::string out = "TLS";
  std::size_t pos = 0;
  int count = 0;
  while (pos + 5 <= data.size() && count < 8) {
    switch (data[pos]) {
      case 20: out += " change_cipher_spec"; break;
      case 21: out += " alert"; break;
      case 22: out += " handshake"; break;
      case 23: out += " application_data"; break;
      default: out += " ?"; break;
    }
    pos += 5 + static_cast<std::size_t>((data[pos + 3] << 8) | data[pos + 4]);
    ++count;
  }
  if (count == 0) out += " fragment";
  return out;
}

enum class Pump { ok, eof, timeout };

/// ByteStream carried inside TLS. The SSL object talks to memory BIOs; this
/// class moves ciphertext between them and the underlying transport.
class TlsStream final : public ByteStream {
 public:
  TlsStream(SslCtxPtr ctx, std::unique_ptr<ByteStream> transport, CaptureLog* log)
      : ctx_(std::move(ctx)), transport_(std::move(transport)), log_(log) {
    ssl_.reset(SSL_new(ctx_.get()));
    if (!ssl_) throw TlsError("SSL_new: " + last_error());
    rbio_ = BIO_new(BIO_s_mem());
    wbio_ = BIO_new(BIO_s_mem());
    BIO_set_mem_eof_return(rbio_, -1);
    SSL_set_bio(ssl_.get(), rbio_, wbio_);
    SSL_set_msg_callback(ssl_.get(), on_message);
    SSL_set_msg_callback_arg(ssl_.get(), &observed_);
  }

  SSL* ssl() { return ssl_.get(); }
  const Observed& observed() const { return observed_; }
  bool timed_out() const { return timed_out_; }
  bool transport_eof() const { return eof_; }

  /// Drives SSL_connect/SSL_accept to completion. Returns false on failure.
  bool handshake(Clock::time_point deadline) {
    for (;;) {
      int rc = SSL_do_handshake(ssl_.get());
      if (!flush()) return false;
      if (rc == 1) return true;
      int err = SSL_get_error(ssl_.get(), rc);
      if (err != SSL_ERROR_WANT_READ) {
        error_ = last_error();
        return false;
      }
      if (fill(deadline) != Pump::ok) return false;
    }
  }

  void write(ByteView data) override {
    if (closed_) throw TransportError("TLS stream closed");
    std::size_t off = 0;
    while (off < data.size()) {
      std::size_t written = 0;
      int rc = SSL_write_ex(ssl_.get(), data.data() + off, data.size() - off, &written);
      if (rc != 1) throw TransportError("SSL_write: " + last_error());
      off += written;
      if (!flush()) throw TransportError("transport closed during TLS write");
    }
  }

  ReadResult read(std::span<std::uint8_t> out, Clock::time_point deadline) override {
    if (out.empty()) return {};
    for (;;) {
      std::size_t got = 0;
      int rc = SSL_read_ex(ssl_.get(), out.data(), out.size(), &got);
      if (rc == 1) return {ReadStatus::ok, got};
      int err = SSL_get_error(ssl_.get(), rc);
      flush();
      if (err == SSL_ERROR_ZERO_RETURN) return {ReadStatus::eof, 0};
      if (err != SSL_ERROR_WANT_READ) {
        ERR_clear_error();
        return {ReadStatus::eof, 0};
      }
      switch (fill(deadline)) {
        case Pump::ok: break;
        case Pump::eof: return {ReadStatus::eof, 0};
        case Pump::timeout: return {ReadStatus::timeout, 0};
      }
    }
  }

  void close() override {
    if (closed_) return;
    closed_ = true;
    SSL_shutdown(ssl_.get());
    flush();
    transport_->close();
  }

  const std::string& error() const { return error_; }

 private:
  bool flush() {
    std::array<std::uint8_t, 16384> buf{};
    for (;;) {
      int n = BIO_read(wbio_, buf.data(), static_cast<int>(buf.size()));
      if (n <= 0) return true;
      ByteView chunk(buf.data(), static_cast<std::size_t>(n));
      if (log_) log_->record(Direction::tx, Layer::tls_record, chunk, describe_records(chunk));
      try {
        transport_->write(chunk);
      } catch (const TransportError&) {
        eof_ = true;
        return false;
      }
    }
  }

  Pump fill(Clock::time_point deadline) {
    std::array<std::uint8_t, 16384> buf{};
    auto r = transport_->read(buf, deadline);
    if (r.status == ReadStatus::timeout) {
      timed_out_ = true;
      return Pump::timeout;
    }
    if (r.status == ReadStatus::eof) {
      eof_ = true;
      return Pump::eof;
    }
    observed_.peer_bytes = true;
    ByteView chunk(buf.data(), r.size);
    if (log_) log_->record(Direction::rx, Layer::tls_record, chunk, describe_records(chunk));
    BIO_write(rbio_, buf.data(), static_cast<int>(r.size));
    return Pump::ok;
  }

  SslCtxPtr ctx_;
  SslPtr ssl_;
  BIO* rbio_ = nullptr;  // owned by ssl_
  BIO* wbio_ = nullptr;
  std::unique_ptr<ByteStream> transport_;
  CaptureLog* log_;
  Observed observed_;
  bool timed_out_ = false;
  bool eof_ = false;
  bool closed_ = false;
  std::string error_;
};

SslCtxPtr client_context(const ClientPolicy& policy) {
  SslCtxPtr ctx(SSL_CTX_new(TLS_client_method()));
  if (!ctx) throw TlsError("SSL_CTX_new: " + last_error());
  SSL_CTX_set_min_proto_version(ctx.get(), TLS1_2_VERSION);
  if (!policy.allow_tls13) SSL_CTX_set_max_proto_version(ctx.get(), TLS1_2_VERSION);
  if (SSL_CTX_set_cipher_list(ctx.get(), policy.cipher_list.c_str()) != 1) {
    throw TlsError("cipher list rejected: " + last_error());
  }
  // The chain is validated separately so that it is recorded even when bad.
  SSL_CTX_set_verify(ctx.get(), SSL_VERIFY_NONE, nullptr);
  return ctx;
}

std::vector<Bytes> peer_chain(SSL* ssl) {
  std::vector<Bytes> out;
  STACK_OF(X509)* chain = SSL_get_peer_cert_chain(ssl);
  if (chain) {
    for (int i = 0; i < sk_X509_num(chain); ++i) out.push_back(x509_to_der(sk_X509_value(chain, i)));
  } else if (X509* leaf = SSL_get0_peer_certificate(ssl)) {
    out.push_back(x509_to_der(leaf));
  }
  return out;
}

}  // namespace

ClientSession probe_tls(std::unique_ptr<ByteStream> transport, const TrustStore& trust,
                        Clock::time_point deadline, const ClientPolicy& policy,
                        CaptureLog* log) {
  ClientSession session;
  auto& res = session.result;
  std::unique_ptr<TlsStream> stream;
  try {
    stream = std::make_unique<TlsStream>(client_context(policy), std::move(transport), log);
  } catch (const TlsError& e) {
    res.failure_stage = FailureStage::hello;
    res.detail = e.what();
    return session;
  }
  SSL_set_connect_state(stream->ssl());
  bool ok = stream->handshake(deadline);

  res.chain_der = peer_chain(stream->ssl());
  for (const auto& der : res.chain_der) {
    try {
      res.presented_chain.push_back(summarize_certificate(der));
    } catch (const std::invalid_argument&) {
      res.presented_chain.push_back({"<unparseable>", "", "", "", ""});
    }
  }
  if (!res.chain_der.empty()) {
    auto verdict = summarize_chain(res.chain_der, trust,
                                   policy.at_time.value_or(std::chrono::system_clock::now()));
    res.matched_root = verdict.matched_root;
    res.chain_problems = verdict.problems;
    res.chain_valid = ok && verdict.valid;
  }

  if (ok) {
    res.handshake_ok = true;
    res.tls_version = SSL_get_version(stream->ssl());
    res.cipher_suite = SSL_get_cipher_name(stream->ssl());
    if (res.chain_der.empty()) res.chain_problems.push_back("no certificate presented");
    session.stream = std::move(stream);
    return session;
  }

  const auto& seen = stream->observed();
  if (stream->timed_out()) {
    res.failure_stage = FailureStage::timeout;
  } else if (seen.alert) {
    res.failure_stage = FailureStage::alert;
  } else if (seen.certificate) {
    res.failure_stage = FailureStage::certificate;
  } else {
    res.failure_stage = FailureStage::hello;
  }
  res.detail = stream->error().empty()
                   ? (stream->transport_eof() ? "peer closed the connection" : "handshake failed")
                   : stream->error();
  res.chain_valid = false;
  stream->close();
  return session;
}

ClientSession probe_tls(const Endpoint& endpoint, const TrustStore& trust, Millis timeout,
                        const ClientPolicy& policy, CaptureLog* log) {
  auto deadline = Clock::now() + timeout;
  std::unique_ptr<TcpStream> tcp;
  try {
    tcp = TcpStream::connect(endpoint, deadline);
  } catch (const TransportError& e) {
    ClientSession s;
    s.result.failure_stage = FailureStage::tcp_connect;
    s.result.detail = e.what();
    return s;
  }
  if (log) log->event(Layer::tcp, "connected to " + endpoint_to_string(endpoint));
  return probe_tls(std::move(tcp), trust, deadline, policy, log);
}

ServerCredentials ServerCredentials::from_pem(const std::string& pem) {
  ServerCredentials c;
  c.chain_ = parse_pem_certificates(pem);
  if (c.chain_.empty()) throw std::invalid_argument("PEM bundle has no certificate");
  auto bio = mem_bio(pem);
  PkeyPtr key(PEM_read_bio_PrivateKey(bio.get(), nullptr, nullptr, nullptr));
  ERR_clear_error();
  if (!key) throw std::invalid_argument("PEM bundle has no private key");
  auto leaf = x509_from_der(c.chain_.front());
  if (X509_check_private_key(leaf.get(), key.get()) != 1) {
    ERR_clear_error();
    throw std::invalid_argument("private key does not match the leaf certificate");
  }
  BioPtr out(BIO_new(BIO_s_mem()));
  PEM_write_bio_PrivateKey(out.get(), key.get(), nullptr, nullptr, 0, nullptr, nullptr);
  c.key_pem_ = bio_to_string(out.get());
  return c;
}

ServerCredentials ServerCredentials::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot read certificate bundle " + path.string());
  std::string pem((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return from_pem(pem);
}

std::unique_ptr<ByteStream> accept_tls(std::unique_ptr<ByteStream> transport,
                                       const ServerCredentials& creds,
                                       Clock::time_point deadline, CaptureLog* log) {
  SslCtxPtr ctx(SSL_CTX_new(TLS_server_method()));
  if (!ctx) throw TlsError("SSL_CTX_new: " + last_error());
  SSL_CTX_set_min_proto_version(ctx.get(), TLS1_2_VERSION);
  auto leaf = x509_from_der(creds.chain().front());
  if (SSL_CTX_use_certificate(ctx.get(), leaf.get()) != 1) {
    throw TlsError("server certificate: " + last_error());
  }
  for (std::size_t i = 1; i < creds.chain().size(); ++i) {
    auto extra = x509_from_der(creds.chain()[i]);
    if (SSL_CTX_add1_chain_cert(ctx.get(), extra.get()) != 1) {
      throw TlsError("server chain: " + last_error());
    }
  }
  auto bio = mem_bio(creds.key_pem());
  PkeyPtr key(PEM_read_bio_PrivateKey(bio.get(), nullptr, nullptr, nullptr));
  if (!key || SSL_CTX_use_PrivateKey(ctx.get(), key.get()) != 1) {
    throw TlsError("server key: " + last_error());
  }
  auto stream = std::make_unique<TlsStream>(std::move(ctx), std::move(transport), log);
  SSL_set_accept_state(stream->ssl());
  if (!stream->handshake(deadline)) {
    std::string why = stream->timed_out() ? "timeout" : stream->error();
    stream->close();
    throw TlsError("TLS accept failed: " + (why.empty() ? std::string("peer closed") : why));
  }
  return stream;
}

}  // namespace chargescope::tls
