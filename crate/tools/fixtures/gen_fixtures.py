#!/usr/bin/env python3
"""Writes the binary test fixtures used by the Rust test suites.

Everything here is written with the Python standard library only, straight
from the on-disk layouts of the Android binary XML / resource table formats
and the zip format, so the fixtures do not depend on the Rust code they test.
Reference dumps are produced separately by dump_reference.py.

Usage: gen_fixtures.py <output dir>
"""

import binascii
import struct
import sys
import zlib
from pathlib import Path

ANDROID_NS = "http://schemas.android.com/apk/res/android"

# res_value data types
T_REFERENCE = 0x01
T_STRING = 0x03
T_INT_DEC = 0x10
T_BOOLEAN = 0x12

ICON_ID = 0x7F030000
APP_NAME_ID = 0x7F020000
THEME_ID = 0x7F010000


def pad4(b: bytes) -> bytes:
    return b + b"\x00" * (-len(b) % 4)


def enc_len16(n: int) -> bytes:
    if n > 0x7FFF:
        return struct.pack("<HH", 0x8000 | (n >> 16), n & 0xFFFF)
    return struct.pack("<H", n)


def enc_len8(n: int) -> bytes:
    if n > 0x7F:
        return bytes([0x80 | (n >> 8), n & 0xFF])
    return bytes([n])


def string_pool(strings, utf8: bool) -> bytes:
    data = b""
    offsets = []
    for s in strings:
        offsets.append(len(data))
        if utf8:
            raw = s.encode("utf-8")
            u16 = len(s.encode("utf-16-le")) // 2
            data += enc_len8(u16) + enc_len8(len(raw)) + raw + b"\x00"
        else:
            raw = s.encode("utf-16-le")
            data += enc_len16(len(raw) // 2) + raw + b"\x00\x00"
    data = pad4(data)
    header_size = 28
    strings_start = header_size + 4 * len(strings)
    flags = 0x100 if utf8 else 0
    body = b"".join(struct.pack("<I", o) for o in offsets) + data
    size = header_size + len(body)
    return (
        struct.pack(
            "<HHIIIIII", 0x0001, header_size, size, len(strings), 0, flags, strings_start, 0
        )
        + body
    )


class Pool:
    def __init__(self, resource_attrs):
        # attribute names with resource ids come first, in resource-map order
        self.strings = [name for name, _ in resource_attrs]
        self.ids = [rid for _, rid in resource_attrs]

    def idx(self, s):
        if s not in self.strings:
            self.strings.append(s)
        return self.strings.index(s)


def node(kind, line, ext):
    return struct.pack("<HHIII", kind, 16, 16 + len(ext), line, 0xFFFFFFFF) + ext


def typed(dtype, data):
    return struct.pack("<HBBI", 8, 0, dtype, data & 0xFFFFFFFF)


def manifest(label_inline: bool, utf8: bool) -> bytes:
    attrs = [
        ("theme", 0x01010000),
        ("label", 0x01010001),
        ("icon", 0x01010002),
        ("name", 0x01010003),
        ("minSdkVersion", 0x0101020C),
        ("versionCode", 0x0101021B),
        ("versionName", 0x0101021C),
        ("allowBackup", 0x01010280),
    ]
    pool = Pool(attrs)
    ns_prefix = pool.idx("android")
    ns_uri = pool.idx(ANDROID_NS)
    events = []
    line = [1]

    def start(name, attributes):
        ext = struct.pack(
            "<IIHHHHHH", 0xFFFFFFFF, pool.idx(name), 20, 20, len(attributes), 0, 0, 0
        )
        for ns, aname, kind, value in attributes:
            ns_i = ns_uri if ns else 0xFFFFFFFF
            if kind == T_STRING:
                si = pool.idx(value)
                ext += struct.pack("<III", ns_i, pool.idx(aname), si) + typed(T_STRING, si)
            else:
                ext += struct.pack("<III", ns_i, pool.idx(aname), 0xFFFFFFFF) + typed(kind, value)
        events.append(node(0x0102, line[0], ext))
        line[0] += 1

    def end(name):
        events.append(node(0x0103, line[0], struct.pack("<II", 0xFFFFFFFF, pool.idx(name))))
        line[0] += 1

    events.append(node(0x0100, line[0], struct.pack("<II", ns_prefix, ns_uri)))
    start(
        "manifest",
        [
            (True, "versionCode", T_INT_DEC, 1),
            (True, "versionName", T_STRING, "1.0"),
            (False, "package", T_STRING, "org.example.fixture"),
        ],
    )
    start("uses-sdk", [(True, "minSdkVersion", T_INT_DEC, 21)])
    end("uses-sdk")
    label = (True, "label", T_STRING, "FixtureApp") if label_inline else (
        True, "label", T_REFERENCE, APP_NAME_ID)
    start(
        "application",
        [
            (True, "theme", T_REFERENCE, THEME_ID),
            label,
            (True, "icon", T_REFERENCE, ICON_ID),
            (True, "allowBackup", T_BOOLEAN, 0xFFFFFFFF),
        ],
    )
    start("activity", [(True, "name", T_STRING, ".MainActivity")])
    start("intent-filter", [])
    start("action", [(True, "name", T_STRING, "android.intent.action.MAIN")])
    end("action")
    start("category", [(True, "name", T_STRING, "android.intent.category.LAUNCHER")])
    end("category")
    end("intent-filter")
    end("activity")
    end("application")
    end("manifest")
    events.append(node(0x0101, line[0], struct.pack("<II", ns_prefix, ns_uri)))

    sp = string_pool(pool.strings, utf8)
    rmap_body = b"".join(struct.pack("<I", i) for i in pool.ids)
    rmap = struct.pack("<HHI", 0x0180, 8, 8 + len(rmap_body)) + rmap_body
    body = sp + rmap + b"".join(events)
    return struct.pack("<HHI", 0x0003, 8, 8 + len(body)) + body


DENSITIES = [("mdpi", 160), ("hdpi", 240), ("xhdpi", 320)]


def config(density: int) -> bytes:
    c = bytearray(64)
    struct.pack_into("<I", c, 0, 64)
    struct.pack_into("<H", c, 14, density)
    return bytes(c)


def type_chunk(type_id, entry_count, density, entries: dict) -> bytes:
    # entries: index -> bytes of ResTable_entry (+ value)
    header_size = 20 + 64
    offsets = b""
    data = b""
    for i in range(entry_count):
        if i in entries:
            offsets += struct.pack("<I", len(data))
            data += entries[i]
        else:
            offsets += struct.pack("<I", 0xFFFFFFFF)
    entries_start = header_size + len(offsets)
    size = entries_start + len(data)
    return (
        struct.pack("<HHIBBHII", 0x0201, header_size, size, type_id, 0, 0, entry_count, entries_start)
        + config(density)
        + offsets
        + data
    )


def type_spec(type_id, entry_count, flags=0) -> bytes:
    body = b"".join(struct.pack("<I", flags) for _ in range(entry_count))
    return struct.pack("<HHIBBHI", 0x0202, 16, 16 + len(body), type_id, 0, 0, entry_count) + body


def simple_entry(key, dtype, data) -> bytes:
    return struct.pack("<HHI", 8, 0, key) + typed(dtype, data)


def resources() -> bytes:
    global_strings = ["FixtureApp"] + [f"res/mipmap-{d}/ic_launcher.png" for d, _ in DENSITIES]
    gpool = string_pool(global_strings, utf8=True)
    type_strings = string_pool(["style", "string", "mipmap"], utf8=False)
    key_strings = string_pool(["AppTheme", "app_name", "ic_launcher"], utf8=False)

    # style/AppTheme: a bag entry with one item, parent none
    bag = struct.pack("<HHIII", 16, 0x0001, 0, 0, 1) + struct.pack("<I", 0x01010000) + typed(
        T_REFERENCE, 0x01030005
    )
    chunks = [
        type_spec(1, 1),
        type_chunk(1, 1, 0, {0: bag}),
        type_spec(2, 1),
        type_chunk(2, 1, 0, {0: simple_entry(1, T_STRING, 0)}),
        type_spec(3, 1, flags=0x0100),
    ]
    for i, (_, dpi) in enumerate(DENSITIES):
        chunks.append(type_chunk(3, 1, dpi, {0: simple_entry(2, T_STRING, 1 + i)}))

    header_size = 288
    name = "org.example.fixture".encode("utf-16-le").ljust(256, b"\x00")
    type_off = header_size
    key_off = header_size + len(type_strings)
    body = type_strings + key_strings + b"".join(chunks)
    pkg = (
        struct.pack("<HHII", 0x0200, header_size, header_size + len(body), 0x7F)
        + name
        + struct.pack("<IIIII", type_off, 3, key_off, 3, 0)
        + body
    )
    table_body = gpool + pkg
    return struct.pack("<HHII", 0x0002, 12, 12 + len(table_body), 1) + table_body


def png(rgb) -> bytes:
    def chunk(tag, data):
        return struct.pack(">I", len(data)) + tag + data + struct.pack(">I", zlib.crc32(tag + data))

    w = h = 4
    raw = b"".join(b"\x00" + bytes(rgb) * w for _ in range(h))
    return (
        b"\x89PNG\r\n\x1a\n"
        + chunk(b"IHDR", struct.pack(">IIBBBBB", w, h, 8, 2, 0, 0, 0))
        + chunk(b"IDAT", zlib.compress(raw, 9))
        + chunk(b"IEND", b"")
    )


def deflate(data: bytes) -> bytes:
    c = zlib.compressobj(6, zlib.DEFLATED, -15)
    return c.compress(data) + c.flush()


def zip_archive(entries, align: bool, force_misalign: bool = False) -> bytes:
    """entries: list of (name, method, data). Writes local headers + central directory."""
    out = bytearray()
    central = bytearray()
    for name, method, data in entries:
        nb = name.encode("utf-8")
        crc = binascii.crc32(data) & 0xFFFFFFFF
        payload = data if method == 0 else deflate(data)
        extra = b""
        header_len = 30 + len(nb)
        if method == 0 and align:
            pad = (-(len(out) + header_len)) % 4
            extra = b"\x00" * pad
        elif method == 0 and force_misalign:
            if (len(out) + header_len) % 4 == 0:
                extra = b"\x00"
        offset = len(out)
        out += struct.pack(
            "<IHHHHHIIIHH", 0x04034B50, 20, 0x0800, method, 0, 0x21,
            crc, len(payload), len(data), len(nb), len(extra),
        )
        out += nb + extra + payload
        central += struct.pack(
            "<IHHHHHHIIIHHHHHII", 0x02014B50, 20, 20, 0x0800, method, 0, 0x21,
            crc, len(payload), len(data), len(nb), 0, 0, 0, 0, 0, offset,
        )
        central += nb
    cd_offset = len(out)
    out += central
    out += struct.pack(
        "<IHHHHIIH", 0x06054B50, 0, 0, len(entries), len(entries), len(central), cd_offset, 0
    )
    return bytes(out)


def fake_dex() -> bytes:
    body = bytes((i * 7 + 3) % 251 for i in range(2048))
    return b"dex\n035\x00" + body


def main():
    out = Path(sys.argv[1])
    out.mkdir(parents=True, exist_ok=True)
    man = manifest(label_inline=True, utf8=False)
    (out / "manifest.axml").write_bytes(man)
    (out / "manifest_ref_label.axml").write_bytes(manifest(label_inline=False, utf8=True))
    arsc = resources()
    (out / "resources.arsc").write_bytes(arsc)

    icons = {"mdpi": png((200, 30, 30)), "hdpi": png((30, 200, 30)), "xhdpi": png((30, 30, 200))}
    (out / "notes.png").write_bytes(png((250, 220, 40)))

    entries = [
        ("AndroidManifest.xml", 8, man),
        ("classes.dex", 8, fake_dex()),
        ("resources.arsc", 0, arsc),
    ]
    for d, _ in DENSITIES:
        entries.append((f"res/mipmap-{d}/ic_launcher.png", 0, icons[d]))
    entries.append(("assets/readme.txt", 8, b"fixture asset\n" * 20))
    (out / "fixture.apk").write_bytes(zip_archive(entries, align=True))
    (out / "misaligned.apk").write_bytes(zip_archive(entries, align=False, force_misalign=True))
    missing = [e for e in entries if e[0] != "AndroidManifest.xml"]
    (out / "no_manifest.apk").write_bytes(zip_archive(missing, align=True))


if __name__ == "__main__":
    main()
