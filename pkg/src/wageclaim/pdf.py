"""Minimal deterministic PDF writer (and a matching text extractor).

Reports must be byte-identical for a fixed clock so golden files stay
valid, which rules out layout engines that stamp their own metadata. This
writer emits uncompressed PDF 1.7 with the standard Helvetica/Courier
fonts: nothing in the output varies except what the caller draws.
"""

from __future__ import annotations

import re
from datetime import datetime, timezone

PAGE_WIDTH = 612  # US Letter, points
PAGE_HEIGHT = 792

_FONTS = {
    "helv": ("F1", "Helvetica"),
    "helv-bold": ("F2", "Helvetica-Bold"),
    "mono": ("F3", "Courier"),
}


def _escape(text: str) -> bytes:
    encoded = text.encode("latin-1", "replace")
    return (
        encoded.replace(b"\\", b"\\\\").replace(b"(", b"\\(").replace(b")", b"\\)")
    )


def _pdf_date(value: datetime) -> str:
    utc = value.astimezone(timezone.utc)
    return utc.strftime("D:%Y%m%d%H%M%S+00'00'")


class PdfBuilder:
    """Append-only page/text model rendered to final bytes on demand."""

    def __init__(self, producer: str, creation_date: datetime):
        self.producer = producer
        self.creation_date = creation_date
        self._pages: list[list[bytes]] = []

    def new_page(self) -> int:
        self._pages.append([])
        return len(self._pages) - 1

    def text(self, x: float, y: float, size: float, content: str, font: str = "helv") -> None:
        if not self._pages:
            self.new_page()
        name, _ = _FONTS[font]
        op = b"BT /%s %s Tf %s %s Td (%s) Tj ET\n" % (
            name.encode(),
            _num(size),
            _num(x),
            _num(y),
            _escape(content),
        )
        self._pages[-1].append(op)

    def hline(self, x0: float, x1: float, y: float, width: float = 0.7) -> None:
        if not self._pages:
            self.new_page()
        self._pages[-1].append(
            b"%s w %s %s m %s %s l S\n" % (_num(width), _num(x0), _num(y), _num(x1), _num(y))
        )

    def render(self) -> bytes:
        # Object layout: 1 catalog, 2 page tree, 3..5 fonts, then for each
        # page a page object followed by its content stream, finally info.
        objects: list[bytes] = []
        font_ids = {}
        next_id = 3
        for key, (name, base) in _FONTS.items():
            font_ids[key] = next_id
            objects.append(
                b"<< /Type /Font /Subtype /Type1 /BaseFont /%s >>" % base.encode()
            )
            next_id += 1

        font_res = b" ".join(
            b"/%s %d 0 R" % (_FONTS[key][0].encode(), font_ids[key]) for key in _FONTS
        )
        page_ids = []
        page_objects: list[bytes] = []
        for ops in self._pages or [[]]:
            page_id = next_id
            content_id = next_id + 1
            next_id += 2
            page_ids.append(page_id)
            page_objects.append(
                b"<< /Type /Page /Parent 2 0 R /MediaBox [0 0 %d %d]"
                b" /Resources << /Font << %s >> >> /Contents %d 0 R >>"
                % (PAGE_WIDTH, PAGE_HEIGHT, font_res, content_id)
            )
            stream = b"".join(ops)
            page_objects.append(
                b"<< /Length %d >>\nstream\n%s\nendstream" % (len(stream), stream)
            )

        info_id = next_id
        info = b"<< /Producer (%s) /CreationDate (%s) >>" % (
            _escape(self.producer),
            _pdf_date(self.creation_date).encode(),
        )

        kids = b" ".join(b"%d 0 R" % pid for pid in page_ids)
        catalog = b"<< /Type /Catalog /Pages 2 0 R >>"
        pages = b"<< /Type /Pages /Kids [%s] /Count %d >>" % (kids, len(page_ids))

        ordered = [catalog, pages] + objects + page_objects + [info]
        out = bytearray(b"%PDF-1.7\n")
        offsets = [0]
        for i, body in enumerate(ordered, start=1):
            offsets.append(len(out))
            out += b"%d 0 obj\n%s\nendobj\n" % (i, body)
        xref_at = len(out)
        count = len(ordered) + 1
        out += b"xref\n0 %d\n" % count
        out += b"0000000000 65535 f \n"
        for off in offsets[1:]:
            out += b"%010d 00000 n \n" % off
        out += (
            b"trailer\n<< /Size %d /Root 1 0 R /Info %d 0 R >>\nstartxref\n%d\n%%%%EOF\n"
            % (count, info_id, xref_at)
        )
        return bytes(out)


def _num(value: float) -> bytes:
    if isinstance(value, int) or float(value).is_integer():
        return b"%d" % int(value)
    return (b"%.2f" % value).rstrip(b"0").rstrip(b".")


_TJ_RE = re.compile(rb"\(((?:[^()\\]|\\.)*)\)\s*Tj")


def extract_texts(pdf_bytes: bytes) -> list[str]:
    """Pull every drawn string out of an uncompressed PDF, in draw order."""
    out = []
    for match in _TJ_RE.finditer(pdf_bytes):
        raw = match.group(1)
        raw = raw.replace(b"\\(", b"(").replace(b"\\)", b")").replace(b"\\\\", b"\\")
        out.append(raw.decode("latin-1"))
    return out
