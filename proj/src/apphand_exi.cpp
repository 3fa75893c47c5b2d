// Grammar for the AppProtocol handshake schema (V2G_CI_AppProtocol.xsd),
// derived by hand for schema-informed, non-strict EXI with default options.
//
// Non-strict grammars keep a second-level escape in every state, so each
// first-level code width is code_width(declared productions + 1):
//
//   DocContent            SE(supportedAppProtocolReq)=0 SE(..Res)=1 SE(*)=2  2 bits
//   Req, before 1st entry SE(AppProtocol)=0                                  1 bit
//   Req, after entry 1-19 SE(AppProtocol)=0 EE=1                             2 bits
//   Req, after entry 20   EE=0                                               1 bit
//   AppProtocolType       SE(next child)=0, then EE=0 after Priority         1 bit
//   simple content        CH=0, then EE=0                                    1 bit
//   Res, start            SE(ResponseCode)=0                                 1 bit
//   Res, after code       SE(SchemaID)=0 EE=1                                2 bits
//   Res, after SchemaID   EE=0                                               1 bit
//   DocEnd                ED (only production)                               0 bits
//
// Value encodings: ProtocolNamespace is a string (length+2 on a string-table
// miss, then code points); VersionNumberMajor/Minor are unsignedInt (EXI
// unsigned integer); SchemaID is unsignedByte (8-bit n-bit integer);
// Priority is 1..20 (5-bit, offset 1); ResponseCode is a 3-value
// enumeration (2 bits).

#include <set>

#include "chargescope/apphand.hpp"
#include "chargescope/exi_bits.hpp"

namespace chargescope::apphand {

namespace {

using exi::BitError;
using exi::BitReader;
using exi::BitWriter;
using exi::code_width;

constexpr std::uint32_t kExiHeader = 0x80;  // '10' + no options + version 1
constexpr unsigned kPriorityBits = code_width(20);
constexpr unsigned kResponseCodeBits = code_width(3);

void write_simple(BitWriter& w, auto&& value) {
  w.bits(0, 1);  // CH
  value();
  w.bits(0, 1);  // EE
}

// Appends code points of a UTF-8 string; throws ValidationError if invalid.
std::vector<std::uint32_t> code_points(const std::string& s) {
  std::vector<std::uint32_t> out;
  for (std::size_t i = 0; i < s.size();) {
    auto c = static_cast<unsigned char>(s[i]);
    std::uint32_t cp = 0;
    std::size_t len = 0;
    if (c < 0x80) {
      cp = c;
      len = 1;
    } else if ((c & 0xE0) == 0xC0) {
      cp = c & 0x1F;
      len = 2;
    } else if ((c & 0xF0) == 0xE0) {
      cp = c & 0x0F;
      len = 3;
    } else if ((c & 0xF8) == 0xF0) {
      cp = c & 0x07;
      len = 4;
    } else {
      throw ValidationError("namespace is not valid UTF-8");
    }
    if (i + len > s.size()) throw ValidationError("namespace is not valid UTF-8");
    for (std::size_t k = 1; k < len; ++k) {
      auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xC0) != 0x80) throw ValidationError("namespace is not valid UTF-8");
      cp = (cp << 6) | (cc & 0x3F);
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

void append_utf8(std::string& out, std::uint32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

void expect_code(BitReader& r, unsigned width, std::uint32_t expected, const char* what) {
  std::size_t at = r.position();
  std::uint32_t code = r.bits(width);
  if (code != expected) {
    throw BitError(at, std::string("unexpected event code ") + std::to_string(code) + " at " +
                           what);
  }
}

// String-table state for the one string-typed element of the schema.
struct StringTable {
  std::vector<std::string> values;
};

std::string read_namespace(BitReader& r, StringTable& table) {
  std::size_t at = r.position();
  std::uint64_t len = r.uvar(5);
  if (len == 0 || len == 1) {
    // Local (0) and global (1) hits index the same table here: the schema
    // has a single string-valued qname.
    if (table.values.empty()) throw BitError(at, "string table hit on empty table");
    std::uint32_t idx = r.bits(code_width(table.values.size()));
    if (idx >= table.values.size()) throw BitError(at, "string table index out of range");
    return table.values[idx];
  }
  std::uint64_t chars = len - 2;
  if (chars > kMaxNamespaceLength) throw BitError(at, "namespace longer than 100 characters");
  if (chars * 8 > r.remaining()) throw BitError(at, "namespace runs past end of stream");
  std::string s;
  for (std::uint64_t i = 0; i < chars; ++i) {
    std::size_t cp_at = r.position();
    std::uint64_t cp = r.uvar(3);
    if (cp > 0x10FFFF) throw BitError(cp_at, "code point out of range");
    append_utf8(s, static_cast<std::uint32_t>(cp));
  }
  if (!s.empty()) table.values.push_back(s);
  return s;
}

std::uint32_t read_uint32(BitReader& r) {
  std::size_t at = r.position();
  std::uint64_t v = r.uvar(5);
  if (v > 0xFFFFFFFFULL) throw BitError(at, "unsignedInt out of range");
  return static_cast<std::uint32_t>(v);
}

template <typename T>
T read_simple(BitReader& r, const char* what, auto&& value) {
  expect_code(r, 1, 0, what);
  T v = value();
  expect_code(r, 1, 0, what);
  return v;
}

AppProtocolEntry read_entry(BitReader& r, StringTable& table) {
  AppProtocolEntry e;
  expect_code(r, 1, 0, "SE(ProtocolNamespace)");
  e.namespace_uri =
      read_simple<std::string>(r, "ProtocolNamespace", [&] { return read_namespace(r, table); });
  expect_code(r, 1, 0, "SE(VersionNumberMajor)");
  e.version_major = read_simple<std::uint32_t>(r, "VersionNumberMajor", [&] { return read_uint32(r); });
  expect_code(r, 1, 0, "SE(VersionNumberMinor)");
  e.version_minor = read_simple<std::uint32_t>(r, "VersionNumberMinor", [&] { return read_uint32(r); });
  expect_code(r, 1, 0, "SE(SchemaID)");
  e.schema_id = read_simple<std::uint8_t>(
      r, "SchemaID", [&] { return static_cast<std::uint8_t>(r.bits(8)); });
  expect_code(r, 1, 0, "SE(Priority)");
  e.priority = read_simple<std::uint8_t>(
      r, "Priority", [&] { return static_cast<std::uint8_t>(r.bits(kPriorityBits) + 1); });
  expect_code(r, 1, 0, "EE(AppProtocol)");
  return e;
}

void read_header(BitReader& r) {
  std::uint32_t header = r.bits(8);
  if (header != kExiHeader) throw BitError(0, "unsupported EXI header");
}

}  // namespace

void validate_request(std::span<const AppProtocolEntry> entries) {
  if (entries.empty() || entries.size() > kMaxEntries) {
    throw ValidationError("supportedAppProtocolReq needs 1 to 20 entries, got " +
                          std::to_string(entries.size()));
  }
  std::set<std::uint8_t> ids;
  std::set<std::uint8_t> priorities;
  for (const auto& e : entries) {
    if (e.priority < 1 || e.priority > 20) {
      throw ValidationError("priority " + std::to_string(e.priority) + " outside 1..20");
    }
    if (!ids.insert(e.schema_id).second) {
      throw ValidationError("duplicate schema_id " + std::to_string(e.schema_id));
    }
    if (!priorities.insert(e.priority).second) {
      throw ValidationError("duplicate priority " + std::to_string(e.priority));
    }
    if (e.namespace_uri.empty()) throw ValidationError("empty protocol namespace");
    if (code_points(e.namespace_uri).size() > kMaxNamespaceLength) {
      throw ValidationError("protocol namespace longer than 100 characters");
    }
  }
}

void validate_response(const HandshakeResponse& res) {
  bool failed = res.response_code == ResponseCode::FailedNoNegotiation;
  if (failed == res.chosen_schema_id.has_value()) {
    throw ValidationError("chosen_schema_id must be present exactly when negotiation succeeded");
  }
}

Bytes encode_handshake_request(std::span<const AppProtocolEntry> entries) {
  validate_request(entries);
  BitWriter w;
  w.bits(kExiHeader, 8);
  w.bits(0, 2);  // SE(supportedAppProtocolReq)
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    w.bits(0, i == 0 ? 1 : 2);  // SE(AppProtocol)
    w.bits(0, 1);
    write_simple(w, [&] {
      auto cps = code_points(e.namespace_uri);
      w.uvar(cps.size() + 2);
      for (auto cp : cps) w.uvar(cp);
    });
    w.bits(0, 1);
    write_simple(w, [&] { w.uvar(e.version_major); });
    w.bits(0, 1);
    write_simple(w, [&] { w.uvar(e.version_minor); });
    w.bits(0, 1);
    write_simple(w, [&] { w.bits(e.schema_id, 8); });
    w.bits(0, 1);
    write_simple(w, [&] { w.bits(e.priority - 1U, kPriorityBits); });
    w.bits(0, 1);  // EE(AppProtocol)
  }
  if (entries.size() < kMaxEntries) {
    w.bits(1, 2);
  } else {
    w.bits(0, 1);
  }
  return w.finish();
}

Expected<std::vector<AppProtocolEntry>, ExiError> decode_handshake_request(ByteView bytes) {
  BitReader r(bytes);
  try {
    read_header(r);
    expect_code(r, 2, 0, "DocContent (expected supportedAppProtocolReq)");
    std::vector<AppProtocolEntry> entries;
    StringTable table;
    for (;;) {
      std::size_t at = r.position();
      if (entries.empty()) {
        expect_code(r, 1, 0, "SE(AppProtocol)");
      } else if (entries.size() < kMaxEntries) {
        std::uint32_t code = r.bits(2);
        if (code == 1) break;
        if (code != 0) throw BitError(at, "unsupported event in supportedAppProtocolReq");
      } else {
        expect_code(r, 1, 0, "EE(supportedAppProtocolReq)");
        break;
      }
      entries.push_back(read_entry(r, table));
    }
    try {
      validate_request(entries);
    } catch (const ValidationError& e) {
      return ExiError{r.position(), e.what()};
    }
    return entries;
  } catch (const BitError& e) {
    return ExiError{e.bit_offset(), e.what()};
  }
}

Bytes encode_handshake_response(const HandshakeResponse& res) {
  validate_response(res);
  BitWriter w;
  w.bits(kExiHeader, 8);
  w.bits(1, 2);  // SE(supportedAppProtocolRes)
  w.bits(0, 1);  // SE(ResponseCode)
  write_simple(w, [&] { w.bits(static_cast<std::uint32_t>(res.response_code), kResponseCodeBits); });
  if (res.chosen_schema_id) {
    w.bits(0, 2);  // SE(SchemaID)
    write_simple(w, [&] { w.bits(*res.chosen_schema_id, 8); });
    w.bits(0, 1);  // EE
  } else {
    w.bits(1, 2);  // EE
  }
  return w.finish();
}

Expected<HandshakeResponse, ExiError> decode_handshake_response(ByteView bytes) {
  BitReader r(bytes);
  try {
    read_header(r);
    expect_code(r, 2, 1, "DocContent (expected supportedAppProtocolRes)");
    expect_code(r, 1, 0, "SE(ResponseCode)");
    HandshakeResponse res;
    std::size_t code_at = r.position() + 1;
    auto code = read_simple<std::uint32_t>(r, "ResponseCode", [&] { return r.bits(kResponseCodeBits); });
    if (code > 2) return ExiError{code_at, "response code out of range"};
    res.response_code = static_cast<ResponseCode>(code);
    std::size_t at = r.position();
    std::uint32_t next = r.bits(2);
    if (next == 0) {
      res.chosen_schema_id = read_simple<std::uint8_t>(
          r, "SchemaID", [&] { return static_cast<std::uint8_t>(r.bits(8)); });
      expect_code(r, 1, 0, "EE(supportedAppProtocolRes)");
    } else if (next != 1) {
      return ExiError{at, "unsupported event in supportedAppProtocolRes"};
    }
    try {
      validate_response(res);
    } catch (const ValidationError& e) {
      return ExiError{r.position(), e.what()};
    }
    return res;
  } catch (const BitError& e) {
    return ExiError{e.bit_offset(), e.what()};
  }
}

}  // namespace chargescope::apphand
