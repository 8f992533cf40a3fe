"""Minimal DICOM Part-10 reader for explicit VR little endian files.

Parses the 128-byte preamble, the "DICM" magic, the file meta group
(always explicit VR little endian), and the main dataset, which must use
the Explicit VR Little Endian transfer syntax (1.2.840.10008.1.2.1).
Sequences are skipped (defined length directly, undefined length by
walking delimitation items).  Only uncompressed 16-bit monochrome pixel
data is supported; everything out of scope is a typed error, not a crash.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .imaging import Image16

EXPLICIT_VR_LITTLE_ENDIAN = "1.2.840.10008.1.2.1"

TAG_TRANSFER_SYNTAX = (0x0002, 0x0010)
TAG_MODALITY = (0x0008, 0x0060)
TAG_SERIES_DESCRIPTION = (0x0008, 0x103E)
TAG_BODY_PART = (0x0018, 0x0015)
TAG_IMAGE_LATERALITY = (0x0020, 0x0062)
TAG_PHOTOMETRIC = (0x0028, 0x0004)
TAG_ROWS = (0x0028, 0x0010)
TAG_COLUMNS = (0x0028, 0x0011)
TAG_BITS_ALLOCATED = (0x0028, 0x0100)
TAG_BITS_STORED = (0x0028, 0x0101)
TAG_PIXEL_DATA = (0x7FE0, 0x0010)

# Tags the pipeline needs; parse_dicom fails if a required one is absent.
_REQUIRED_TAGS = (
    TAG_MODALITY,
    TAG_PHOTOMETRIC,
    TAG_ROWS,
    TAG_COLUMNS,
    TAG_BITS_ALLOCATED,
    TAG_BITS_STORED,
    TAG_PIXEL_DATA,
)
_OPTIONAL_TAGS = (TAG_SERIES_DESCRIPTION, TAG_BODY_PART, TAG_IMAGE_LATERALITY)

# VRs whose length field is a 4-byte value after 2 reserved bytes.
_LONG_VRS = {b"OB", b"OW", b"OF", b"OL", b"OD", b"SQ", b"UC", b"UR", b"UT", b"UN"}

_ITEM_TAG = (0xFFFE, 0xE000)
_ITEM_DELIM_TAG = (0xFFFE, 0xE00D)
_SEQ_DELIM_TAG = (0xFFFE, 0xE0DD)
_UNDEFINED_LENGTH = 0xFFFFFFFF


class DicomError(ValueError):
    """Base class for DICOM reading errors."""


class BadMagic(DicomError):
    """File does not carry the "DICM" marker at offset 128."""


class UnsupportedTransferSyntax(DicomError):
    """Dataset transfer syntax is not Explicit VR Little Endian."""


class TruncatedElement(DicomError):
    """File ends in the middle of an element."""


class MissingRequiredTag(DicomError):
    """A tag the pipeline depends on is absent."""


class UnsupportedModality(DicomError):
    """Modality is not CR or DX."""


class NoViewText(DicomError):
    """Neither SeriesDescription nor BodyPartExamined is present; the
    record needs manual labeling (burned-in text path)."""


class PixelLengthMismatch(DicomError):
    """Pixel data length disagrees with rows x columns x 2 bytes."""


class UnsupportedPhotometric(DicomError):
    """Photometric interpretation is not MONOCHROME1/MONOCHROME2."""


@dataclass
class DicomObject:
    """Parsed subset of one DICOM file."""

    transfer_syntax: str
    elements: dict[tuple[int, int], tuple[str, bytes]]  # tag -> (VR, raw value)

    def raw(self, tag: tuple[int, int]) -> bytes | None:
        entry = self.elements.get(tag)
        return entry[1] if entry else None

    def text(self, tag: tuple[int, int]) -> str | None:
        """String value with DICOM space/NUL padding stripped."""
        raw = self.raw(tag)
        if raw is None:
            return None
        return raw.decode("ascii", errors="replace").strip("\x00 ").strip()

    def uint16(self, tag: tuple[int, int]) -> int:
        raw = self.raw(tag)
        if raw is None or len(raw) < 2:
            raise MissingRequiredTag(f"tag {_fmt_tag(tag)} missing or short")
        return struct.unpack("<H", raw[:2])[0]

    @property
    def rows(self) -> int:
        return self.uint16(TAG_ROWS)

    @property
    def columns(self) -> int:
        return self.uint16(TAG_COLUMNS)

    @property
    def bits_allocated(self) -> int:
        return self.uint16(TAG_BITS_ALLOCATED)

    @property
    def bits_stored(self) -> int:
        return self.uint16(TAG_BITS_STORED)

    @property
    def photometric(self) -> str:
        return self.text(TAG_PHOTOMETRIC) or ""


@dataclass
class RadiographMeta:
    """Curation metadata extracted from one accepted radiograph."""

    modality: str
    raw_view: str
    laterality: str | None
    photometric: str


def _fmt_tag(tag: tuple[int, int]) -> str:
    return f"({tag[0]:04X},{tag[1]:04X})"


class _Reader(object):
    def __init__(self, data: bytes, pos: int = 0):
        self.data = data
        self.pos = pos

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedElement(f"file ends inside {what}")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def tag(self) -> tuple[int, int]:
        group, elem = struct.unpack("<HH", self.take(4, "element tag"))
        return group, elem

    def at_end(self) -> bool:
        return self.pos >= len(self.data)


def _read_element_header(r: _Reader) -> tuple[tuple[int, int], bytes, int]:
    """Read one explicit-VR element header; returns (tag, vr, value length)."""
    tag = r.tag()
    if tag[0] == 0xFFFE:
        # Delimitation items have no VR, just a 4-byte length.
        length = struct.unpack("<I", r.take(4, "item length"))[0]
        return tag, b"", length
    vr = r.take(2, "VR")
    if vr in _LONG_VRS:
        r.take(2, "reserved bytes")
        length = struct.unpack("<I", r.take(4, "value length"))[0]
    else:
        length = struct.unpack("<H", r.take(2, "value length"))[0]
    return tag, vr, length


def _skip_undefined_sequence(r: _Reader) -> None:
    """Skip items until the sequence delimitation item."""
    while True:
        tag, _vr, length = _read_element_header(r)
        if tag == _SEQ_DELIM_TAG:
            return
        if tag != _ITEM_TAG:
            raise TruncatedElement(f"unexpected tag {_fmt_tag(tag)} in sequence")
        if length == _UNDEFINED_LENGTH:
            _skip_undefined_item(r)
        else:
            r.take(length, "sequence item")


def _skip_undefined_item(r: _Reader) -> None:
    """Skip dataset elements until the item delimitation item."""
    while True:
        tag, vr, length = _read_element_header(r)
        if tag == _ITEM_DELIM_TAG:
            return
        if length == _UNDEFINED_LENGTH:
            if vr == b"SQ" or tag == _ITEM_TAG:
                _skip_undefined_sequence(r)
            else:
                raise TruncatedElement(
                    f"undefined length on non-sequence tag {_fmt_tag(tag)}"
                )
        else:
            r.take(length, f"value of {_fmt_tag(tag)}")


def parse_dicom(data: bytes) -> DicomObject:
    """Parse a Part-10 file into the tag subset the pipeline needs."""
    if len(data) < 132 or data[128:132] != b"DICM":
        raise BadMagic('no "DICM" marker at offset 128')
    r = _Reader(data, 132)

    # File meta group (0002,xxxx), always explicit VR little endian.
    meta: dict[tuple[int, int], bytes] = {}
    while not r.at_end():
        mark = r.pos
        tag, vr, length = _read_element_header(r)
        if tag[0] != 0x0002:
            r.pos = mark
            break
        if length == _UNDEFINED_LENGTH:
            raise TruncatedElement(f"undefined length in file meta {_fmt_tag(tag)}")
        meta[tag] = r.take(length, f"value of {_fmt_tag(tag)}")

    ts_raw = meta.get(TAG_TRANSFER_SYNTAX)
    if ts_raw is None:
        raise MissingRequiredTag("transfer syntax (0002,0010) missing")
    transfer_syntax = ts_raw.decode("ascii", errors="replace").strip("\x00 ").strip()
    if transfer_syntax != EXPLICIT_VR_LITTLE_ENDIAN:
        raise UnsupportedTransferSyntax(transfer_syntax)

    elements: dict[tuple[int, int], tuple[str, bytes]] = {}
    wanted = set(_REQUIRED_TAGS) | set(_OPTIONAL_TAGS)
    while not r.at_end():
        tag, vr, length = _read_element_header(r)
        if vr == b"SQ":
            if length == _UNDEFINED_LENGTH:
                _skip_undefined_sequence(r)
            else:
                r.take(length, f"sequence {_fmt_tag(tag)}")
            continue
        if length == _UNDEFINED_LENGTH:
            raise UnsupportedTransferSyntax(
                f"undefined-length {_fmt_tag(tag)}: encapsulated pixel data "
                "is not supported"
            )
        value = r.take(length, f"value of {_fmt_tag(tag)}")
        if tag in wanted:
            elements[tag] = (vr.decode("ascii"), value)

    for tag in _REQUIRED_TAGS:
        if tag not in elements:
            raise MissingRequiredTag(f"required tag {_fmt_tag(tag)} absent")
    return DicomObject(transfer_syntax=transfer_syntax, elements=elements)


def extract_meta(obj: DicomObject) -> RadiographMeta:
    """Curation metadata; rejects modalities other than CR/DX.

    View text comes from SeriesDescription, falling back to
    BodyPartExamined; if both are absent the record is flagged for manual
    labeling via NoViewText.
    """
    modality = obj.text(TAG_MODALITY) or ""
    if modality not in ("CR", "DX"):
        raise UnsupportedModality(f"modality {modality!r} not in (CR, DX)")
    raw_view = obj.text(TAG_SERIES_DESCRIPTION)
    if not raw_view:
        raw_view = obj.text(TAG_BODY_PART)
    if not raw_view:
        raise NoViewText("no SeriesDescription or BodyPartExamined")
    return RadiographMeta(
        modality=modality,
        raw_view=raw_view,
        laterality=obj.text(TAG_IMAGE_LATERALITY),
        photometric=obj.photometric,
    )


def extract_pixels(obj: DicomObject) -> Image16:
    """Decode uncompressed 16-bit monochrome pixel data.

    MONOCHROME1 is inverted to the MONOCHROME2 convention
    (pixel' = 2^bits_stored - 1 - pixel) so 0 is always darkest.
    """
    photometric = obj.photometric
    if photometric not in ("MONOCHROME1", "MONOCHROME2"):
        raise UnsupportedPhotometric(photometric)
    if obj.bits_allocated != 16:
        raise UnsupportedPhotometric(
            f"bits allocated {obj.bits_allocated}, only 16 supported"
        )
    rows, cols = obj.rows, obj.columns
    raw = obj.raw(TAG_PIXEL_DATA) or b""
    expected = rows * cols * 2
    if len(raw) != expected:
        raise PixelLengthMismatch(
            f"pixel data is {len(raw)} bytes, expected {expected} for {cols}x{rows}"
        )
    pixels = np.frombuffer(raw, dtype="<u2").reshape(rows, cols).astype(np.uint16)
    if photometric == "MONOCHROME1":
        maxval = (1 << obj.bits_stored) - 1
        pixels = (maxval - pixels.astype(np.int32)).astype(np.uint16)
    return Image16(pixels)
