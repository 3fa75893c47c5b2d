"""Test-vector generator for the supportedAppProtocol EXI handshake.

Independent bit-level encoder for the AppProtocol schema (schema-informed,
non-strict, default options, bit-packed). Used only to produce frozen vectors
for the C++ test suite; the C++ codec never calls into this.
"""
import sys


class Bits:
    def __init__(self):
        self.bits = []

    def n(self, value, width):
        for i in reversed(range(width)):
            self.bits.append((value >> i) & 1)

    def uvar(self, value):
        while True:
            b = value & 0x7F
            value >>= 7
            self.n(b | (0x80 if value else 0), 8)
            if not value:
                break

    def data(self):
        out = bytearray()
        bits = self.bits + [0] * (-len(self.bits) % 8)
        for i in range(0, len(bits), 8):
            v = 0
            for b in bits[i:i + 8]:
                v = (v << 1) | b
            out.append(v)
        return bytes(out)


def simple(b, emit):
    b.n(0, 1)  # CH typed
    emit()
    b.n(0, 1)  # EE


def req(entries):
    b = Bits()
    b.n(0x80, 8)
    b.n(0, 2)  # SE(supportedAppProtocolReq)
    for i, (ns, major, minor, sid, prio) in enumerate(entries):
        b.n(0, 1 if i == 0 else 2)  # SE(AppProtocol)
        b.n(0, 1)
        def s():
            b.uvar(len(ns) + 2)
            for c in ns:
                b.uvar(ord(c))
        simple(b, s)
        b.n(0, 1)
        simple(b, lambda: b.uvar(major))
        b.n(0, 1)
        simple(b, lambda: b.uvar(minor))
        b.n(0, 1)
        simple(b, lambda: b.n(sid, 8))
        b.n(0, 1)
        simple(b, lambda: b.n(prio - 1, 5))
        b.n(0, 1)  # EE(AppProtocol)
    b.n(1, 2) if len(entries) < 20 else b.n(0, 1)  # EE(supportedAppProtocolReq)
    return b.data()


def res(code, sid):
    b = Bits()
    b.n(0x80, 8)
    b.n(1, 2)  # SE(supportedAppProtocolRes)
    b.n(0, 1)
    simple(b, lambda: b.n(code, 2))
    if sid is None:
        b.n(1, 2)  # EE
    else:
        b.n(0, 2)
        simple(b, lambda: b.n(sid, 8))
        b.n(0, 1)  # EE
    return b.data()


DIN = "urn:din:70121:2012:MsgDef"
ISO2 = "urn:iso:15118:2:2013:MsgDef"
ISO20_DC = "urn:iso:std:iso:15118:-20:DC"

CASES = {
    "din_only": req([(DIN, 2, 0, 1, 1)]),
    "iso2_only": req([(ISO2, 2, 0, 1, 1)]),
    "all_three": req([(ISO20_DC, 1, 0, 1, 1), (ISO2, 2, 0, 2, 2), (DIN, 2, 0, 3, 3)]),
    "res_ok_1": res(0, 1),
    "res_minor_dev_2": res(1, 2),
    "res_failed": res(2, None),
}

if __name__ == "__main__":
    for name, data in CASES.items():
        sys.stdout.write(f"{name} {data.hex()}\n")
