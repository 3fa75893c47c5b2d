#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "chargescope/bytes.hpp"
#include "chargescope/capture.hpp"
#include "chargescope/net.hpp"
#include "chargescope/transport.hpp"

namespace chargescope::tls {

using TimePoint = std::chrono::system_clock::time_point;

struct TrustRoot {
  std::string name;
  Bytes der;
};

/// Trusted V2G roots. Every root must be a self-signed CA certificate.
class TrustStore {
 public:
  /// Throws std::invalid_argument when `der` is not a self-signed CA.
  void add(std::string name, Bytes der);
  const std::vector<TrustRoot>& roots() const { return roots_; }
  bool empty() const { return roots_.empty(); }

  /// Loads every *.pem, *.crt and *.der file; the root is named after the
  /// file stem. Throws std::runtime_error for unreadable files.
  static TrustStore load_directory(const std::filesystem::path& dir);

 private:
  std::vector<TrustRoot> roots_;
};

struct CertificateSummary {
  std::string subject;
  std::string issuer;
  std::string not_before;  // RFC 3339, UTC
  std::string not_after;
  std::string key_algorithm;

  bool operator==(const CertificateSummary&) const = default;
};

/// Throws std::invalid_argument for unparseable DER.
CertificateSummary summarize_certificate(ByteView der);

struct ChainVerdict {
  bool valid = false;
  std::optional<std::string> matched_root;
  std::vector<std::string> problems;
};

/// Path validation of a presented chain (leaf first): each certificate is
/// signed by the next, every validity window contains `at`, intermediates
/// are CAs, and the chain ends at (or is issued by) a root in `trust`.
/// Revocation is not checked.
ChainVerdict summarize_chain(const std::vector<Bytes>& chain, const TrustStore& trust,
                             TimePoint at);

std::vector<Bytes> parse_pem_certificates(const std::string& pem);
std::string to_pem_bundle(const std::vector<Bytes>& chain);

enum class FailureStage { tcp_connect, hello, certificate, alert, timeout };

std::string to_string(FailureStage s);

struct TlsProbeResult {
  bool handshake_ok = false;
  std::string tls_version;
  std::string cipher_suite;
  std::vector<CertificateSummary> presented_chain;
  std::vector<Bytes> chain_der;
  bool chain_valid = false;
  std::optional<std::string> matched_root;
  std::vector<std::string> chain_problems;
  std::optional<FailureStage> failure_stage;
  std::string detail;
};

struct ClientPolicy {
  /// ECDHE-ECDSA suites first; TLS 1.3 suites are OpenSSL defaults.
  std::string cipher_list =
      "ECDHE-ECDSA-AES128-SHA256:ECDHE-ECDSA-AES128-GCM-SHA256:ECDHE-ECDSA-AES256-GCM-SHA384:"
      "ECDHE-RSA-AES128-GCM-SHA256:ECDHE-RSA-AES256-GCM-SHA384";
  bool allow_tls13 = true;
  /// Validation time; the current time when unset.
  std::optional<TimePoint> at_time;
};

struct ClientSession {
  TlsProbeResult result;
  /// Encrypted stream for the application handshake; null on failure.
  std::unique_ptr<ByteStream> stream;
};

/// Runs a TLS client handshake over `transport`. All failures are reported
/// in the result, never thrown.
ClientSession probe_tls(std::unique_ptr<ByteStream> transport, const TrustStore& trust,
                        Clock::time_point deadline, const ClientPolicy& policy = {},
                        CaptureLog* log = nullptr);

/// Connects over TCP first; refusal or unreachable maps to tcp_connect.
ClientSession probe_tls(const Endpoint& endpoint, const TrustStore& trust, Millis timeout,
                        const ClientPolicy& policy = {}, CaptureLog* log = nullptr);

/// Server identity: leaf first, then intermediates, plus the leaf key.
class ServerCredentials {
 public:
  /// Reads certificates and one private key from a single PEM bundle.
  /// Throws std::invalid_argument when either is missing or they mismatch.
  static ServerCredentials from_pem(const std::string& pem);
  static ServerCredentials from_file(const std::filesystem::path& path);

  const std::vector<Bytes>& chain() const { return chain_; }
  const std::string& key_pem() const { return key_pem_; }

 private:
  std::vector<Bytes> chain_;
  std::string key_pem_;
};

class TlsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Server side of the handshake; throws TlsError on failure.
std::unique_ptr<ByteStream> accept_tls(std::unique_ptr<ByteStream> transport,
                                       const ServerCredentials& creds,
                                       Clock::time_point deadline, CaptureLog* log = nullptr);

}  // namespace chargescope::tls
