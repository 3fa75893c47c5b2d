#include "chargescope/pki.hpp"

#include <fstream>
#include <stdexcept>

#include "ossl.hpp"

namespace chargescope::pki {

using namespace ossl;

namespace {

PkeyPtr new_p256_key() {
  PkeyPtr key(EVP_EC_gen("P-256"));
  if (!key) throw std::runtime_error("EC key generation failed: " + last_error());
  return key;
}

void add_ext(X509* cert, X509* issuer, int nid, const char* value) {
  X509V3_CTX ctx;
  X509V3_set_ctx_nodb(&ctx);
  X509V3_set_ctx(&ctx, issuer, cert, nullptr, nullptr, 0);
  X509_EXTENSION* ext = X509V3_EXT_conf_nid(nullptr, &ctx, nid, value);
  if (!ext) throw std::runtime_error("extension " + std::string(value) + ": " + last_error());
  X509_add_ext(cert, ext, -1);
  X509_EXTENSION_free(ext);
}

struct Issued {
  X509Ptr cert;
  PkeyPtr key;
};

Issued issue(const std::string& cn, const Validity& validity, long serial, bool ca,
             const Issued* issuer) {
  Issued out{X509Ptr(X509_new()), new_p256_key()};
  X509* x = out.cert.get();
  X509_set_version(x, X509_VERSION_3);
  ASN1_INTEGER_set(X509_get_serialNumber(x), serial);
  X509_NAME* name = X509_get_subject_name(x);
  X509_NAME_add_entry_by_txt(name, "CN", MBSTRING_UTF8,
                             reinterpret_cast<const unsigned char*>(cn.c_str()), -1, -1, 0);
  X509_NAME_add_entry_by_txt(name, "O", MBSTRING_UTF8,
                             reinterpret_cast<const unsigned char*>("chargescope test PKI"), -1,
                             -1, 0);
  X509_set_issuer_name(x, issuer ? X509_get_subject_name(issuer->cert.get()) : name);
  if (ASN1_TIME_set_string_X509(X509_getm_notBefore(x), validity.not_before.c_str()) != 1 ||
      ASN1_TIME_set_string_X509(X509_getm_notAfter(x), validity.not_after.c_str()) != 1) {
    throw std::invalid_argument("bad validity time for " + cn);
  }
  X509_set_pubkey(x, out.key.get());
  X509* signer_cert = issuer ? issuer->cert.get() : x;
  add_ext(x, signer_cert, NID_basic_constraints, ca ? "critical,CA:TRUE" : "critical,CA:FALSE");
  add_ext(x, signer_cert, NID_key_usage,
          ca ? "critical,keyCertSign,cRLSign" : "critical,digitalSignature,keyAgreement");
  add_ext(x, signer_cert, NID_subject_key_identifier, "hash");
  if (issuer) add_ext(x, signer_cert, NID_authority_key_identifier, "keyid:always");
  EVP_PKEY* signer_key = issuer ? issuer->key.get() : out.key.get();
  if (X509_sign(x, signer_key, EVP_sha256()) <= 0) {
    throw std::runtime_error("signing " + cn + ": " + last_error());
  }
  return out;
}

std::string cert_pem(X509* x) {
  BioPtr bio(BIO_new(BIO_s_mem()));
  PEM_write_bio_X509(bio.get(), x);
  return bio_to_string(bio.get());
}

std::string key_pem(EVP_PKEY* k) {
  BioPtr bio(BIO_new(BIO_s_mem()));
  PEM_write_bio_PrivateKey(bio.get(), k, nullptr, nullptr, 0, nullptr, nullptr);
  return bio_to_string(bio.get());
}

void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << content;
}

}  // namespace

std::string TestPki::server_bundle() const { return leaf_cert + sub_ca_cert + leaf_key; }

std::string TestPki::expired_server_bundle() const {
  return expired_leaf_cert + sub_ca_cert + expired_leaf_key;
}

TestPki generate_test_pki(const PkiOptions& o) {
  auto root = issue(o.root_cn, o.root, 1, true, nullptr);
  auto sub = issue(o.sub_ca_cn, o.sub_ca, 2, true, &root);
  auto leaf = issue(o.leaf_cn, o.leaf, 3, false, &sub);
  auto expired = issue(o.leaf_cn + " (expired)", o.expired_leaf, 4, false, &sub);
  return {cert_pem(root.cert.get()),    cert_pem(sub.cert.get()),
          cert_pem(leaf.cert.get()),    key_pem(leaf.key.get()),
          cert_pem(expired.cert.get()), key_pem(expired.key.get())};
}

void write_test_pki(const TestPki& pki, const std::filesystem::path& dir,
                    const std::string& root_name) {
  std::filesystem::create_directories(dir / "trust");
  write_file(dir / "trust" / (root_name + ".pem"), pki.root_cert);
  write_file(dir / "secc-chain.pem", pki.server_bundle());
  write_file(dir / "secc-chain-expired.pem", pki.expired_server_bundle());
}

}  // namespace chargescope::pki
