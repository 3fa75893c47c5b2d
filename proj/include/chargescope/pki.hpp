#pragma once

#include <filesystem>
#include <string>

namespace chargescope::pki {

struct Validity {
  std::string not_before;  // ASN.1 GeneralizedTime, e.g. "20240101000000Z"
  std::string not_after;
};

struct PkiOptions {
  std::string root_cn = "Hubject V2G Root CA";
  std::string sub_ca_cn = "V2G Sub-CA 1";
  std::string leaf_cn = "SECC Test Leaf";
  Validity root{"20200101000000Z", "20600101000000Z"};
  Validity sub_ca{"20200101000000Z", "20500101000000Z"};
  Validity leaf{"20240101000000Z", "20440101000000Z"};
  Validity expired_leaf{"20200101000000Z", "20220101000000Z"};
};

/// PEM text of a three-level EC P-256 test hierarchy.
struct TestPki {
  std::string root_cert;
  std::string sub_ca_cert;
  std::string leaf_cert;
  std::string leaf_key;
  std::string expired_leaf_cert;
  std::string expired_leaf_key;

  /// leaf + sub-CA + key, the bundle an EVSE serves.
  std::string server_bundle() const;
  std::string expired_server_bundle() const;
};

TestPki generate_test_pki(const PkiOptions& options = {});

/// Writes `<root_name>.pem` into dir/trust and the two server bundles
/// (secc-chain.pem, secc-chain-expired.pem) into dir.
void write_test_pki(const TestPki& pki, const std::filesystem::path& dir,
                    const std::string& root_name = "hubject-v2g-root");

}  // namespace chargescope::pki
