#!/usr/bin/env python3
"""Produces the reference dumps the Rust tests use as oracles.

Binary XML and resource-table dumps come from androguard (an independent
parser); zip listings and alignment reports come from the stdlib zipfile
module plus a direct scan of local file headers.

Usage: dump_reference.py <fixture dir>   (requires `pip install androguard`)
"""

import struct
import sys
import zipfile
from pathlib import Path

from loguru import logger

logger.remove()

from androguard.core.axml import ARSCParser, AXMLPrinter  # noqa: E402


def dump_axml(path: Path):
    xml = AXMLPrinter(path.read_bytes()).get_xml().decode()
    Path(str(path) + ".dump.txt").write_text(xml)


def dump_arsc(path: Path):
    table = ARSCParser(path.read_bytes())
    lines = []
    for pkg in table.get_packages_names():
        lines.append(f"package {pkg}")
        ids = sorted({int(x.get("id"), 16) for x in _public(table, pkg)})
        for rid in ids:
            name = table.get_resource_xml_name(rid)
            for cfg, value in table.get_resolved_res_configs(rid):
                qual = cfg.get_qualifier() or "default"
                if isinstance(value, str):
                    shown = value
                else:
                    shown = "<complex>"
                lines.append(f"0x{rid:08x} {name} {qual} density={cfg.get_density()} {shown}")
    Path(str(path) + ".dump.txt").write_text("\n".join(lines) + "\n")


def _public(table, pkg):
    import xml.etree.ElementTree as ET

    root = ET.fromstring(table.get_public_resources(pkg))
    return root.findall("public")


def local_data_offsets(data: bytes, zf: zipfile.ZipFile):
    out = []
    for info in zf.infolist():
        off = info.header_offset
        sig, = struct.unpack_from("<I", data, off)
        assert sig == 0x04034B50
        name_len, extra_len = struct.unpack_from("<HH", data, off + 26)
        out.append((info, off + 30 + name_len + extra_len))
    return out


def listing(path: Path):
    data = path.read_bytes()
    with zipfile.ZipFile(path) as zf:
        rows = []
        for info, data_off in local_data_offsets(data, zf):
            method = "stored" if info.compress_type == 0 else "deflated"
            rows.append(
                f"{info.filename}\t{method}\t{info.CRC:08x}\t{info.file_size}\t{data_off}"
            )
        Path(str(path) + ".listing.txt").write_text("\n".join(rows) + "\n")
        bad = [
            (info.filename, off)
            for info, off in local_data_offsets(data, zf)
            if info.compress_type == 0 and off % 4 != 0
        ]
    report = ["Verifying alignment of %s (4)..." % path.name]
    for name, off in bad:
        report.append(f"{off} {name} (BAD - {off % 4})")
    report.append("Verification FAILED" if bad else "Verification succesful")
    Path(str(path) + ".align.txt").write_text("\n".join(report) + "\n")


def main():
    d = Path(sys.argv[1])
    dump_axml(d / "manifest.axml")
    dump_axml(d / "manifest_ref_label.axml")
    dump_arsc(d / "resources.arsc")
    for apk in ("fixture.apk", "misaligned.apk", "signed_reference.apk"):
        if (d / apk).exists():
            listing(d / apk)


if __name__ == "__main__":
    main()
