#!/usr/bin/env python3
"""Signs fixture.apk with the bundled test key, independently of the Rust
signer: the JAR manifest and signature file are written here, and the CMS
block is produced and checked by the `openssl cms` command-line tool.

Usage: sign_reference.py <fixture dir> <key.pem> <cert.pem>
"""

import base64
import hashlib
import subprocess
import sys
import tempfile
import zipfile
from pathlib import Path


def b64sha256(data: bytes) -> str:
    return base64.b64encode(hashlib.sha256(data).digest()).decode()


def wrap72(line: str) -> bytes:
    raw = line.encode("utf-8")
    out = [raw[:72]]
    raw = raw[72:]
    while raw:
        out.append(b" " + raw[:71])
        raw = raw[71:]
    return b"".join(x + b"\r\n" for x in out)


def main():
    d, key, cert = Path(sys.argv[1]), sys.argv[2], sys.argv[3]
    src = zipfile.ZipFile(d / "fixture.apk")
    entries = [(i, src.read(i.filename)) for i in src.infolist()]

    mf = wrap72("Manifest-Version: 1.0") + wrap72("Created-By: reference-script") + b"\r\n"
    sections = []
    for info, data in entries:
        sec = wrap72(f"Name: {info.filename}") + wrap72(f"SHA-256-Digest: {b64sha256(data)}") + b"\r\n"
        sections.append((info.filename, sec))
        mf += sec

    sf = (
        wrap72("Signature-Version: 1.0")
        + wrap72("Created-By: reference-script")
        + wrap72(f"SHA-256-Digest-Manifest: {b64sha256(mf)}")
        + b"\r\n"
    )
    for name, sec in sections:
        sf += wrap72(f"Name: {name}") + wrap72(f"SHA-256-Digest: {b64sha256(sec)}") + b"\r\n"

    with tempfile.TemporaryDirectory() as tmp:
        sf_path = Path(tmp) / "CERT.SF"
        sf_path.write_bytes(sf)
        rsa_path = Path(tmp) / "CERT.RSA"
        subprocess.run(
            ["openssl", "cms", "-sign", "-binary", "-in", sf_path, "-signer", cert, "-inkey", key,
             "-md", "sha256", "-outform", "DER", "-out", rsa_path, "-nosmimecap"],
            check=True,
        )
        rsa = rsa_path.read_bytes()
        check = subprocess.run(
            ["openssl", "cms", "-verify", "-binary", "-inform", "DER", "-in", rsa_path,
             "-content", sf_path, "-noverify", "-purpose", "any", "-out", "/dev/null"],
            capture_output=True, text=True, check=True,
        )

    out = d / "signed_reference.apk"
    with zipfile.ZipFile(out, "w") as zf:
        zf.writestr(zipfile.ZipInfo("META-INF/MANIFEST.MF"), mf, compress_type=zipfile.ZIP_DEFLATED)
        zf.writestr(zipfile.ZipInfo("META-INF/CERT.SF"), sf, compress_type=zipfile.ZIP_DEFLATED)
        zf.writestr(zipfile.ZipInfo("META-INF/CERT.RSA"), rsa, compress_type=zipfile.ZIP_DEFLATED)
        for info, data in entries:
            zf.writestr(info, data, compress_type=info.compress_type)

    transcript = ["openssl cms -verify (detached, CERT.SF):", check.stderr.strip()]
    reread = zipfile.ZipFile(out)
    for info, data in entries:
        ok = b64sha256(reread.read(info.filename)) == b64sha256(data)
        transcript.append(f"{info.filename}: {'OK' if ok else 'FAILED'}")
    (d / "signed_reference.apk.verify.txt").write_text("\n".join(transcript) + "\n")


if __name__ == "__main__":
    main()
