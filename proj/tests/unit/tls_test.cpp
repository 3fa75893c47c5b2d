#include <gtest/gtest.h>

#include <openssl/x509_vfy.h>

#include <fstream>
#include <thread>

#include "chargescope/pki.hpp"
#include "chargescope/tls.hpp"
#include "paths.hpp"

using namespace chargescope;
using namespace chargescope::tls;

namespace {

const pki::TestPki& test_pki() {
  static const pki::TestPki p = pki::generate_test_pki();
  return p;
}

Bytes der_of(const std::string& pem) { return parse_pem_certificates(pem).at(0); }

TrustStore hubject_store() {
  TrustStore s;
  s.add("hubject-v2g-root", der_of(test_pki().root_cert));
  return s;
}

TimePoint year(int y) {
  std::tm tm{};
  tm.tm_year = y - 1900;
  tm.tm_mon = 5;
  tm.tm_mday = 1;
  return std::chrono::system_clock::from_time_t(timegm(&tm));
}

// Independent oracle: OpenSSL's own path builder at a fixed time.
bool openssl_verifies(const std::vector<Bytes>& chain, const TrustStore& trust, TimePoint at) {
  auto parse = [](const Bytes& der) {
    const unsigned char* p = der.data();
    return d2i_X509(nullptr, &p, static_cast<long>(der.size()));
  };
  X509_STORE* store = X509_STORE_new();
  for (const auto& r : trust.roots()) {
    X509* x = parse(r.der);
    X509_STORE_add_cert(store, x);
    X509_free(x);
  }
  STACK_OF(X509)* untrusted = sk_X509_new_null();
  for (std::size_t i = 1; i < chain.size(); ++i) sk_X509_push(untrusted, parse(chain[i]));
  X509* leaf = parse(chain[0]);
  X509_STORE_CTX* ctx = X509_STORE_CTX_new();
  X509_STORE_CTX_init(ctx, store, leaf, untrusted);
  X509_STORE_CTX_set_time(ctx, 0, std::chrono::system_clock::to_time_t(at));
  bool ok = X509_verify_cert(ctx) == 1;
  X509_STORE_CTX_free(ctx);
  X509_free(leaf);
  sk_X509_pop_free(untrusted, X509_free);
  X509_STORE_free(store);
  return ok;
}

TEST(ChainValidation, ThreeLevelChainUnderHubjectRoot) {
  std::vector<Bytes> chain{der_of(test_pki().leaf_cert), der_of(test_pki().sub_ca_cert)};
  auto v = summarize_chain(chain, hubject_store(), year(2030));
  EXPECT_TRUE(v.valid);
  EXPECT_EQ(v.matched_root, "hubject-v2g-root");
  EXPECT_TRUE(v.problems.empty());
}

TEST(ChainValidation, ChainThatIncludesTheRoot) {
  std::vector<Bytes> chain{der_of(test_pki().leaf_cert), der_of(test_pki().sub_ca_cert),
                           der_of(test_pki().root_cert)};
  auto v = summarize_chain(chain, hubject_store(), year(2030));
  EXPECT_TRUE(v.valid);
  EXPECT_EQ(v.matched_root, "hubject-v2g-root");
}

TEST(ChainValidation, CertificateSignedDirectlyByRoot) {
  std::vector<Bytes> chain{der_of(test_pki().sub_ca_cert)};
  EXPECT_TRUE(summarize_chain(chain, hubject_store(), year(2030)).valid);
}

TEST(ChainValidation, UnknownRoot) {
  auto other = pki::generate_test_pki({.root_cn = "Other Root"});
  TrustStore store;
  store.add("other", der_of(other.root_cert));
  std::vector<Bytes> chain{der_of(test_pki().leaf_cert), der_of(test_pki().sub_ca_cert)};
  auto v = summarize_chain(chain, store, year(2030));
  EXPECT_FALSE(v.valid);
  EXPECT_FALSE(v.matched_root);
}

TEST(ChainValidation, ExpiredLeaf) {
  std::vector<Bytes> chain{der_of(test_pki().expired_leaf_cert), der_of(test_pki().sub_ca_cert)};
  auto v = summarize_chain(chain, hubject_store(), year(2030));
  EXPECT_FALSE(v.valid);
  ASSERT_FALSE(v.problems.empty());
  EXPECT_NE(v.problems[0].find("expired"), std::string::npos);
}

TEST(ChainValidation, NotYetValid) {
  std::vector<Bytes> chain{der_of(test_pki().leaf_cert), der_of(test_pki().sub_ca_cert)};
  auto v = summarize_chain(chain, hubject_store(), year(2023));
  EXPECT_FALSE(v.valid);
  EXPECT_NE(v.problems[0].find("not yet valid"), std::string::npos);
}

TEST(ChainValidation, WrongOrderBreaksSignatureLink) {
  std::vector<Bytes> chain{der_of(test_pki().sub_ca_cert), der_of(test_pki().leaf_cert)};
  EXPECT_FALSE(summarize_chain(chain, hubject_store(), year(2030)).valid);
}

TEST(ChainValidation, UnparseableCertificate) {
  std::vector<Bytes> chain{Bytes{0x30, 0x03, 0x01, 0x02, 0x03}};
  auto v = summarize_chain(chain, hubject_store(), year(2030));
  EXPECT_FALSE(v.valid);
  EXPECT_NE(v.problems[0].find("does not parse"), std::string::npos);
}

TEST(ChainValidation, TamperedSignatureIsRejected) {
  Bytes leaf = der_of(test_pki().leaf_cert);
  leaf[leaf.size() - 3] ^= 0x01;
  std::vector<Bytes> chain{leaf, der_of(test_pki().sub_ca_cert)};
  EXPECT_FALSE(summarize_chain(chain, hubject_store(), year(2030)).valid);
}

TEST(ChainValidation, AgreesWithOpenSslVerifier) {
  auto other = pki::generate_test_pki({.root_cn = "Other Root"});
  const auto& p = test_pki();
  std::vector<std::vector<Bytes>> chains{
      {der_of(p.leaf_cert), der_of(p.sub_ca_cert)},
      {der_of(p.expired_leaf_cert), der_of(p.sub_ca_cert)},
      {der_of(p.sub_ca_cert)},
      {der_of(other.leaf_cert), der_of(other.sub_ca_cert)},
      {der_of(p.leaf_cert), der_of(other.sub_ca_cert)},
  };
  for (int y : {2019, 2021, 2023, 2030, 2045, 2055}) {
    for (std::size_t i = 0; i < chains.size(); ++i) {
      EXPECT_EQ(summarize_chain(chains[i], hubject_store(), year(y)).valid,
                openssl_verifies(chains[i], hubject_store(), year(y)))
          << "chain " << i << " year " << y;
    }
  }
}

TEST(ChainValidation, Deterministic) {
  std::vector<Bytes> chain{der_of(test_pki().expired_leaf_cert), der_of(test_pki().sub_ca_cert)};
  auto a = summarize_chain(chain, hubject_store(), year(2030));
  auto b = summarize_chain(chain, hubject_store(), year(2030));
  EXPECT_EQ(a.valid, b.valid);
  EXPECT_EQ(a.problems, b.problems);
}

TEST(TrustStore, RejectsNonRoot) {
  TrustStore s;
  EXPECT_THROW(s.add("leaf", der_of(test_pki().leaf_cert)), std::invalid_argument);
  EXPECT_THROW(s.add("junk", Bytes{1, 2, 3}), std::invalid_argument);
}

TEST(TrustStore, LoadsDirectoryAndNamesByStem) {
  testsupport::TempDir dir("trust");
  pki::write_test_pki(test_pki(), dir.path());
  auto store = TrustStore::load_directory(dir.path() / "trust");
  ASSERT_EQ(store.roots().size(), 1u);
  EXPECT_EQ(store.roots()[0].name, "hubject-v2g-root");
  EXPECT_THROW(TrustStore::load_directory(dir.path() / "missing"), std::runtime_error);
}

TEST(CertificateSummary, Fields) {
  auto s = summarize_certificate(der_of(test_pki().leaf_cert));
  EXPECT_NE(s.subject.find("CN=SECC Test Leaf"), std::string::npos);
  EXPECT_NE(s.issuer.find("CN=V2G Sub-CA 1"), std::string::npos);
  EXPECT_EQ(s.not_before, "2024-01-01T00:00:00Z");
  EXPECT_EQ(s.not_after, "2044-01-01T00:00:00Z");
  EXPECT_EQ(s.key_algorithm, "EC prime256v1");
}

TEST(Pem, BundleRoundTrip) {
  std::vector<Bytes> chain{der_of(test_pki().leaf_cert), der_of(test_pki().sub_ca_cert)};
  EXPECT_EQ(parse_pem_certificates(to_pem_bundle(chain)), chain);
}

TEST(ServerCredentials, KeyMustMatchLeaf) {
  EXPECT_NO_THROW(ServerCredentials::from_pem(test_pki().server_bundle()));
  EXPECT_THROW(ServerCredentials::from_pem(test_pki().leaf_cert + test_pki().expired_leaf_key),
               std::invalid_argument);
  EXPECT_THROW(ServerCredentials::from_pem(test_pki().leaf_cert), std::invalid_argument);
}

struct ServerThread {
  std::unique_ptr<ByteStream> tls;
  std::string error;
  std::jthread thread;

  ServerThread(std::unique_ptr<ByteStream> raw, const std::string& bundle) {
    thread = std::jthread([this, raw = std::move(raw), bundle]() mutable {
      try {
        tls = accept_tls(std::move(raw), ServerCredentials::from_pem(bundle),
                         Clock::now() + Millis(3000));
        std::array<std::uint8_t, 4> buf{};
        if (read_exact(*tls, buf, Clock::now() + Millis(3000)) == ReadStatus::ok) tls->write(buf);
      } catch (const std::exception& e) {
        error = e.what();
      }
    });
  }
};

TEST(TlsProbe, HandshakeAndValidChain) {
  auto [client_raw, server_raw] = make_in_process_stream_pair();
  ServerThread server(std::move(server_raw), test_pki().server_bundle());
  CaptureLog log;
  ClientPolicy policy;
  policy.at_time = year(2030);
  auto s = probe_tls(std::move(client_raw), hubject_store(), Clock::now() + Millis(3000), policy,
                     &log);
  ASSERT_TRUE(s.result.handshake_ok) << s.result.detail;
  EXPECT_TRUE(s.result.chain_valid);
  EXPECT_EQ(s.result.matched_root, "hubject-v2g-root");
  EXPECT_FALSE(s.result.failure_stage);
  EXPECT_EQ(s.result.presented_chain.size(), 2u);
  EXPECT_EQ(s.result.tls_version, "TLSv1.3");
  ASSERT_TRUE(s.stream);
  s.stream->write(Bytes{1, 2, 3, 4});
  std::array<std::uint8_t, 4> echo{};
  EXPECT_EQ(read_exact(*s.stream, echo, Clock::now() + Millis(3000)), ReadStatus::ok);
  EXPECT_EQ(echo[3], 4);
  s.stream->close();
  server.thread.join();
  EXPECT_TRUE(server.error.empty()) << server.error;
  bool saw_handshake = false;
  for (const auto& e : log.entries()) {
    saw_handshake |= e.layer == Layer::tls_record && e.summary.find("handshake") != std::string::npos;
  }
  EXPECT_TRUE(saw_handshake);
}

TEST(TlsProbe, Tls12OffersEcdheEcdsaFirst) {
  auto [client_raw, server_raw] = make_in_process_stream_pair();
  ServerThread server(std::move(server_raw), test_pki().server_bundle());
  ClientPolicy policy;
  policy.allow_tls13 = false;
  policy.at_time = year(2030);
  auto s = probe_tls(std::move(client_raw), hubject_store(), Clock::now() + Millis(3000), policy);
  ASSERT_TRUE(s.result.handshake_ok) << s.result.detail;
  EXPECT_EQ(s.result.tls_version, "TLSv1.2");
  EXPECT_EQ(s.result.cipher_suite, "ECDHE-ECDSA-AES128-SHA256");
  s.stream->close();
}

TEST(TlsProbe, ExpiredLeafStillRecordsChain) {
  auto [client_raw, server_raw] = make_in_process_stream_pair();
  ServerThread server(std::move(server_raw), test_pki().expired_server_bundle());
  ClientPolicy policy;
  policy.at_time = year(2030);
  auto s = probe_tls(std::move(client_raw), hubject_store(), Clock::now() + Millis(3000), policy);
  EXPECT_TRUE(s.result.handshake_ok);
  EXPECT_FALSE(s.result.chain_valid);
  EXPECT_EQ(s.result.presented_chain.size(), 2u);
  bool expired = false;
  for (const auto& p : s.result.chain_problems) expired |= p.find("expired") != std::string::npos;
  EXPECT_TRUE(expired);
  s.stream->close();
}

TEST(TlsProbe, PlaintextPeerFailsAtHelloOrAlert) {
  auto [client_raw, server_raw] = make_in_process_stream_pair();
  std::jthread peer([raw = std::move(server_raw)]() mutable {
    std::array<std::uint8_t, 512> buf{};
    raw->read(buf, Clock::now() + Millis(2000));
    std::string junk = "\x01\xfe\x80\x01\x00\x00\x00\x04\x80\x40\x00\x40";
    raw->write(ByteView(reinterpret_cast<const std::uint8_t*>(junk.data()), junk.size()));
    raw->read(buf, Clock::now() + Millis(500));
    raw->close();
  });
  auto s = probe_tls(std::move(client_raw), hubject_store(), Clock::now() + Millis(3000));
  EXPECT_FALSE(s.result.handshake_ok);
  ASSERT_TRUE(s.result.failure_stage);
  EXPECT_TRUE(*s.result.failure_stage == FailureStage::hello ||
              *s.result.failure_stage == FailureStage::alert);
  EXPECT_FALSE(s.result.chain_valid);
  EXPECT_FALSE(s.stream);
}

TEST(TlsProbe, SilentPeerTimesOut) {
  auto [client_raw, server_raw] = make_in_process_stream_pair();
  auto s = probe_tls(std::move(client_raw), hubject_store(), Clock::now() + Millis(100));
  EXPECT_EQ(s.result.failure_stage, FailureStage::timeout);
}

TEST(TlsProbe, RefusedTcpConnect) {
  Endpoint ep;
  {
    TcpListener l(parse_endpoint("127.0.0.1", 0));
    ep = l.local_endpoint();
  }
  auto s = probe_tls(ep, hubject_store(), Millis(500));
  EXPECT_EQ(s.result.failure_stage, FailureStage::tcp_connect);
  EXPECT_FALSE(s.result.handshake_ok);
}

TEST(TlsProbe, OverRealTcp) {
  TcpListener listener(parse_endpoint("127.0.0.1", 0));
  auto ep = listener.local_endpoint();
  std::string err;
  std::jthread t([&] {
    auto raw = listener.accept(Clock::now() + Millis(3000));
    try {
      auto tls = accept_tls(std::move(raw), ServerCredentials::from_pem(test_pki().server_bundle()),
                            Clock::now() + Millis(3000));
      tls->close();
    } catch (const std::exception& e) {
      err = e.what();
    }
  });
  ClientPolicy policy;
  policy.at_time = year(2030);
  auto s = probe_tls(ep, hubject_store(), Millis(3000), policy);
  EXPECT_TRUE(s.result.handshake_ok) << s.result.detail;
  EXPECT_TRUE(s.result.chain_valid);
  if (s.stream) s.stream->close();
  t.join();
  EXPECT_TRUE(err.empty()) << err;
}

}  // namespace
