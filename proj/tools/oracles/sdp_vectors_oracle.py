"""Test-vector generator for V2GTP/SDP framing.

Uses the pure-Python SDP and V2GTP classes of the open-source `iso15118`
package as an independent reference. Run with that wheel on PYTHONPATH:

    ISO15118_ROOT=<extracted iso15118 wheel> python3 sdp_vectors_oracle.py
"""
import random

import importlib.util
import os
import sys
import types

# Load iso15118/shared/messages/sdp.py without executing the package
# __init__ (which pulls in logging/env dependencies unrelated to SDP).
_root = os.environ.get("ISO15118_ROOT", ".")
for name in ("iso15118", "iso15118.shared", "iso15118.shared.messages"):
    mod = types.ModuleType(name)
    mod.__path__ = [os.path.join(_root, *name.split("."))]
    sys.modules[name] = mod


def _load(name):
    path = os.path.join(_root, *name.split(".")) + ".py"
    spec = importlib.util.spec_from_file_location(name, path)
    module = importlib.util.module_from_spec(spec)
    sys.modules[name] = module
    spec.loader.exec_module(module)
    return module


_exc = types.ModuleType("iso15118.shared.exceptions")
_exc.InvalidSDPRequestError = type("InvalidSDPRequestError", (Exception,), {})
_exc.InvalidSDPResponseError = type("InvalidSDPResponseError", (Exception,), {})
sys.modules[_exc.__name__] = _exc
_load("iso15118.shared.messages.enums")
_sdp = _load("iso15118.shared.messages.sdp")
SDPRequest, SDPResponse = _sdp.SDPRequest, _sdp.SDPResponse
Security, Transport = _sdp.Security, _sdp.Transport


def v2gtp(payload_type, payload):
    return bytes([0x01, 0xFE]) + payload_type.to_bytes(2, "big") + len(payload).to_bytes(4, "big") + payload


def main():
    for sec in (Security.TLS, Security.NO_TLS):
        r = SDPRequest(sec, Transport.TCP)
        print(f"req {sec.name} {v2gtp(0x9000, r.to_payload()).hex()}")
    rng = random.Random(15118)
    for i in range(8):
        ip = bytes(rng.randrange(256) for _ in range(16))
        port = rng.randrange(49152, 65536)
        sec = rng.choice([Security.TLS, Security.NO_TLS])
        r = SDPResponse(ip, port, sec, Transport.TCP)
        print(f"res {ip.hex()} {port} {sec.value} {v2gtp(0x9001, r.to_payload()).hex()}")


if __name__ == "__main__":
    main()
