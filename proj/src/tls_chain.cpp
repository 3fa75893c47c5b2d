#include <algorithm>
#include <ctime>
#include <fstream>
#include <sstream>

#include "chargescope/tls.hpp"
#include "ossl.hpp"

namespace chargescope::tls {

using namespace ossl;

namespace {

std::string name_to_string(const X509_NAME* name) {
  BioPtr bio(BIO_new(BIO_s_mem()));
  X509_NAME_print_ex(bio.get(), name, 0, XN_FLAG_RFC2253);
  return bio_to_string(bio.get());
}

std::string time_to_string(const ASN1_TIME* t) {
  std::tm tm{};
  if (ASN1_TIME_to_tm(t, &tm) != 1) return "invalid";
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string key_algorithm(X509* x) {
  EVP_PKEY* key = X509_get0_pubkey(x);
  if (!key) return "unknown";
  int id = EVP_PKEY_get_base_id(key);
  if (id == EVP_PKEY_EC) {
    char group[64] = {};
    std::size_t len = 0;
    if (EVP_PKEY_get_group_name(key, group, sizeof(group), &len) == 1) {
      return std::string("EC ") + group;
    }
    return "EC";
  }
  if (id == EVP_PKEY_RSA) return "RSA " + std::to_string(EVP_PKEY_get_bits(key));
  const char* sn = OBJ_nid2sn(id);
  return sn ? sn : "unknown";
}

bool self_signed_ca(X509* x) {
  return X509_check_issued(x, x) == X509_V_OK && X509_verify(x, X509_get0_pubkey(x)) == 1 &&
         X509_check_ca(x) >= 1;
}

// Issuer/subject linkage plus signature.
bool issued_by(X509* child, X509* parent) {
  return X509_check_issued(parent, child) == X509_V_OK &&
         X509_verify(child, X509_get0_pubkey(parent)) == 1;
}

void check_window(X509* x, std::time_t at, std::size_t index, std::vector<std::string>& out) {
  if (X509_cmp_time(X509_get0_notBefore(x), &at) >= 0) {
    out.push_back("certificate " + std::to_string(index) + " not yet valid");
  }
  if (X509_cmp_time(X509_get0_notAfter(x), &at) <= 0) {
    out.push_back("certificate " + std::to_string(index) + " expired");
  }
}

}  // namespace

void TrustStore::add(std::string name, Bytes der) {
  auto x = x509_from_der(der);
  if (!x) throw std::invalid_argument("trust root " + name + " does not parse");
  if (!self_signed_ca(x.get())) {
    throw std::invalid_argument("trust root " + name + " is not a self-signed CA");
  }
  roots_.push_back({std::move(name), std::move(der)});
}

TrustStore TrustStore::load_directory(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw std::runtime_error("trust store directory not found: " + dir.string());
  }
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    auto ext = e.path().extension().string();
    if (e.is_regular_file() && (ext == ".pem" || ext == ".crt" || ext == ".der")) {
      files.push_back(e.path());
    }
  }
  std::sort(files.begin(), files.end());
  TrustStore store;
  for (const auto& f : files) {
    std::ifstream in(f, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + f.string());
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::vector<Bytes> certs;
    if (content.find("-----BEGIN CERTIFICATE-----") != std::string::npos) {
      certs = parse_pem_certificates(content);
    } else {
      certs.emplace_back(content.begin(), content.end());
    }
    if (certs.size() != 1) {
      throw std::runtime_error(f.string() + ": expected exactly one certificate");
    }
    store.add(f.stem().string(), std::move(certs.front()));
  }
  return store;
}

CertificateSummary summarize_certificate(ByteView der) {
  auto x = x509_from_der(der);
  if (!x) throw std::invalid_argument("certificate does not parse");
  return {name_to_string(X509_get_subject_name(x.get())),
          name_to_string(X509_get_issuer_name(x.get())),
          time_to_string(X509_get0_notBefore(x.get())),
          time_to_string(X509_get0_notAfter(x.get())), key_algorithm(x.get())};
}

ChainVerdict summarize_chain(const std::vector<Bytes>& chain, const TrustStore& trust,
                             TimePoint at) {
  ChainVerdict v;
  if (chain.empty()) {
    v.problems.push_back("empty chain");
    return v;
  }
  std::vector<X509Ptr> certs;
  for (std::size_t i = 0; i < chain.size(); ++i) {
    auto x = x509_from_der(chain[i]);
    if (!x) {
      v.problems.push_back("certificate " + std::to_string(i) + " does not parse");
      return v;
    }
    certs.push_back(std::move(x));
  }
  const std::time_t t = std::chrono::system_clock::to_time_t(at);
  for (std::size_t i = 0; i < certs.size(); ++i) {
    check_window(certs[i].get(), t, i, v.problems);
    if (i > 0 && X509_check_ca(certs[i].get()) < 1) {
      v.problems.push_back("certificate " + std::to_string(i) + " is not a CA");
    }
    if (i + 1 < certs.size() && !issued_by(certs[i].get(), certs[i + 1].get())) {
      v.problems.push_back("certificate " + std::to_string(i) + " not signed by certificate " +
                           std::to_string(i + 1));
    }
  }

  X509* top = certs.back().get();
  for (const auto& root : trust.roots()) {
    auto r = x509_from_der(root.der);
    if (!r) continue;
    bool is_root = root.der == chain.back();
    if (is_root || issued_by(top, r.get())) {
      v.matched_root = root.name;
      if (!is_root) check_window(r.get(), t, certs.size(), v.problems);
      break;
    }
  }
  if (!v.matched_root) v.problems.push_back("chain does not end at a trusted root");
  v.valid = v.problems.empty();
  return v;
}

std::vector<Bytes> parse_pem_certificates(const std::string& pem) {
  std::vector<Bytes> out;
  auto bio = mem_bio(pem);
  for (;;) {
    X509* x = PEM_read_bio_X509(bio.get(), nullptr, nullptr, nullptr);
    if (!x) break;
    X509Ptr holder(x);
    out.push_back(x509_to_der(x));
  }
  ERR_clear_error();
  return out;
}

std::string to_pem_bundle(const std::vector<Bytes>& chain) {
  BioPtr bio(BIO_new(BIO_s_mem()));
  for (const auto& der : chain) {
    auto x = x509_from_der(der);
    if (!x) throw std::invalid_argument("certificate does not parse");
    PEM_write_bio_X509(bio.get(), x.get());
  }
  return bio_to_string(bio.get());
}

}  // namespace chargescope::tls
