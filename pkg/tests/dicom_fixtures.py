"""Independent DICOM Part-10 fixture writer.

Builds files byte by byte from the explicit-VR little-endian layout
(PS3.10 part 10): 128-byte preamble, "DICM", file meta group, dataset.
Deliberately shares no code with the package parser so round-trip tests
are a genuine two-implementation check.
"""

from __future__ import annotations

import struct

EXPLICIT_VR_LE = "1.2.840.10008.1.2.1"
IMPLICIT_VR_LE = "1.2.840.10008.1.2"

# VRs that use the 12-byte header (2 reserved bytes + 32-bit length).
LONG_VRS = {"OB", "OW", "OF", "SQ", "UT", "UN"}


def element(group: int, elem: int, vr: str, value: bytes) -> bytes:
    if len(value) % 2:
        value += b"\x00" if vr in ("OB", "UI") else b" "
    head = struct.pack("<HH", group, elem) + vr.encode("ascii")
    if vr in LONG_VRS:
        return head + b"\x00\x00" + struct.pack("<I", len(value)) + value
    return head + struct.pack("<H", len(value)) + value


def string_element(group: int, elem: int, vr: str, text: str) -> bytes:
    return element(group, elem, vr, text.encode("ascii"))


def us_element(group: int, elem: int, value: int) -> bytes:
    return element(group, elem, "US", struct.pack("<H", value))


def file_meta(transfer_syntax: str = EXPLICIT_VR_LE) -> bytes:
    body = (
        element(0x0002, 0x0001, "OB", b"\x00\x01")
        + string_element(0x0002, 0x0002, "UI", "1.2.840.10008.5.1.4.1.1.1")
        + string_element(0x0002, 0x0003, "UI", "1.2.3.4.5.6.7.8.9")
        + string_element(0x0002, 0x0010, "UI", transfer_syntax)
    )
    group_length = element(0x0002, 0x0000, "UL", struct.pack("<I", len(body)))
    return group_length + body


def pixel_element(pixels_le: bytes) -> bytes:
    return element(0x7FE0, 0x0010, "OW", pixels_le)


def sequence_defined(group: int, elem: int, items: list[bytes]) -> bytes:
    body = b""
    for item in items:
        body += struct.pack("<HHI", 0xFFFE, 0xE000, len(item)) + item
    return (
        struct.pack("<HH", group, elem)
        + b"SQ\x00\x00"
        + struct.pack("<I", len(body))
        + body
    )


def sequence_undefined(group: int, elem: int, items: list[bytes]) -> bytes:
    body = b""
    for item in items:
        body += struct.pack("<HHI", 0xFFFE, 0xE000, 0xFFFFFFFF)
        body += item
        body += struct.pack("<HHI", 0xFFFE, 0xE00D, 0)
    body += struct.pack("<HHI", 0xFFFE, 0xE0DD, 0)
    return (
        struct.pack("<HH", group, elem)
        + b"SQ\x00\x00"
        + struct.pack("<I", 0xFFFFFFFF)
        + body
    )


def build_file(
    rows: int = 4,
    cols: int = 4,
    pixel_values: list[int] | None = None,
    modality: str = "CR",
    series_description: str | None = "L FORE CARPUS DP",
    body_part: str | None = None,
    laterality: str | None = None,
    photometric: str = "MONOCHROME2",
    bits_stored: int = 16,
    transfer_syntax: str = EXPLICIT_VR_LE,
    extra_dataset: bytes = b"",
    pixel_bytes_override: bytes | None = None,
    include_pixel_module: bool = True,
) -> bytes:
    """A complete Part-10 file with the tags the pipeline reads."""
    if pixel_values is None:
        pixel_values = list(range(rows * cols))
    pixels = struct.pack(f"<{len(pixel_values)}H", *pixel_values)
    if pixel_bytes_override is not None:
        pixels = pixel_bytes_override

    dataset = b""
    dataset += string_element(0x0008, 0x0060, "CS", modality)
    if series_description is not None:
        dataset += string_element(0x0008, 0x103E, "LO", series_description)
    if body_part is not None:
        dataset += string_element(0x0018, 0x0015, "CS", body_part)
    if laterality is not None:
        dataset += string_element(0x0020, 0x0062, "CS", laterality)
    dataset += extra_dataset
    if include_pixel_module:
        dataset += string_element(0x0028, 0x0004, "CS", photometric)
        dataset += us_element(0x0028, 0x0010, rows)
        dataset += us_element(0x0028, 0x0011, cols)
        dataset += us_element(0x0028, 0x0100, 16)
        dataset += us_element(0x0028, 0x0101, bits_stored)
        dataset += pixel_element(pixels)

    return b"\x00" * 128 + b"DICM" + file_meta(transfer_syntax) + dataset
