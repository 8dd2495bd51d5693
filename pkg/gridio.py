"""
Reading and writing grids.

Input formats:
- csv: one grid row per line (d = 2), or a single line or column for d = 1
- pgm: binary (P5) or plain (P2) graymaps, 8 or 16 bit, read as photon counts
- raw: text with the header "AMSGRID v1 d=<d> n=<n> dtype=<counts|reals>"
       followed by n^d whitespace-separated values in row-major order

Outputs: the same three formats for fields, 16-bit PGM rasters, 8-bit PGM
masks and region CSVs.

PGM values are taken as stored; maxval only selects the sample width. PGM
parsing is therefore done here with numpy, since Pillow rescales anything
that is not 255 or 65535. Writing always uses one of those two maxvals and
goes through Pillow.
"""

import csv
import os
import re
import warnings

import numpy as np
from PIL import Image

from errors import DomainError, ExportWarning, ParseError, ShapeError
from localmeans import COUNTS, REALS, make_field
from regions import region_header, region_row


CSV = 'csv'
PGM = 'pgm'
RAW = 'raw'

FORMATS = (CSV, PGM, RAW)

RAW_MAGIC = 'AMSGRID'
RAW_VERSION = 'v1'

PGM_MAX_16 = 65535
PGM_MAX_8 = 255

EXTENSIONS = {
    '.csv': CSV,
    '.pgm': PGM,
    '.grid': RAW,
    '.txt': RAW,
}


def detect_format(path):
    """Guess the format from the extension, then from the first bytes."""
    ext = os.path.splitext(path)[1].lower()
    if ext in EXTENSIONS:
        return EXTENSIONS[ext]

    with open(path, 'rb') as f:
        head = f.read(len(RAW_MAGIC))
    if head[:2] in (b'P2', b'P5'):
        return PGM
    if head == RAW_MAGIC.encode():
        return RAW
    return CSV


def _is_count_data(array):
    return bool((array >= 0).all() and np.array_equal(array, np.round(array)))


def _resolve_dtype(array, dtype):
    if dtype in (None, 'auto'):
        return COUNTS if _is_count_data(array) else REALS
    return dtype


def read_grid(path, fmt=None, dtype=None):
    """
    Read a grid file into a Field.

    fmt defaults to detect_format(path). dtype=None keeps the file's own
    declaration (raw), treats PGM as counts, and for CSV picks counts when
    every value is a nonnegative integer.
    """
    if not os.path.exists(path):
        raise ParseError(f"Grid file not found: {path}")
    fmt = fmt or detect_format(path)

    if fmt == CSV:
        array = read_csv_values(path)
        return make_field(array, _resolve_dtype(array, dtype))
    if fmt == PGM:
        array = read_pgm_values(path)
        return make_field(array, dtype or COUNTS)
    if fmt == RAW:
        array, declared = read_raw_values(path)
        return make_field(array, dtype or declared)

    raise ParseError(f"Unknown grid format {fmt!r}; expected one of {', '.join(FORMATS)}")


# ----------------------------------------------------------------------------
# CSV
# ----------------------------------------------------------------------------

def read_csv_values(path):
    """
    Rows of comma-separated numbers; every row must have the same length.
    A single row or a single column is returned flat.
    """
    rows = []
    width = None
    with open(path, 'r', newline='') as f:
        for line_no, row in enumerate(csv.reader(f), start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            try:
                values = [float(cell) for cell in row]
            except ValueError:
                raise ParseError(f"Non-numeric value in row {line_no}", line=line_no)
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise ParseError(
                    f"Ragged CSV: row {line_no} has {len(values)} values, expected {width}",
                    line=line_no,
                )
            rows.append(values)

    if not rows:
        raise ParseError(f"CSV file {path} holds no values", line=1)
    if len(rows) == 1:
        return np.asarray(rows[0])
    if width == 1:
        return np.asarray([row[0] for row in rows])
    return np.asarray(rows)


def _format_value(value, dtype):
    return str(int(value)) if dtype == COUNTS else repr(float(value))


def write_csv(field, path):
    """Write a 1-d or 2-d field as CSV (integers for counts, repr floats otherwise)."""
    if field.d > 2:
        raise ShapeError(f"CSV holds at most 2 dimensions, field has d={field.d}")
    rows = [field.data] if field.d == 1 else field.data
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        for row in rows:
            writer.writerow([_format_value(v, field.dtype) for v in row])


# ----------------------------------------------------------------------------
# PGM
# ----------------------------------------------------------------------------

_TOKEN = re.compile(rb'\s*(?:#[^\n]*\n\s*)*(\S+)')


def _line_of(data, pos):
    return data.count(b'\n', 0, pos) + 1


def _pgm_header(data):
    """Parse magic, width, height and maxval; return them and the payload start."""
    magic = data[:2]
    if magic not in (b'P2', b'P5'):
        raise ParseError("Not a PGM file (expected P2 or P5)", line=1, offset=0)

    pos = 2
    values = []
    for name in ('width', 'height', 'maxval'):
        match = _TOKEN.match(data, pos)
        if not match:
            raise ParseError(f"PGM header ends before {name}", line=_line_of(data, pos), offset=pos)
        try:
            values.append(int(match.group(1)))
        except ValueError:
            raise ParseError(f"PGM {name} is not an integer",
                             line=_line_of(data, match.start(1)), offset=match.start(1))
        pos = match.end()

    width, height, maxval = values
    if width < 1 or height < 1 or not 0 < maxval <= PGM_MAX_16:
        raise ParseError(f"Invalid PGM header {width}x{height} maxval={maxval}", line=_line_of(data, pos))

    # exactly one whitespace byte separates the header from binary data
    return magic, width, height, maxval, pos + 1


def read_pgm_values(path):
    """Raw sample values of a P2/P5 graymap as an (height, width) array."""
    with open(path, 'rb') as f:
        data = f.read()

    magic, width, height, maxval, start = _pgm_header(data)
    count = width * height

    if magic == b'P5':
        sample = np.dtype('u1') if maxval <= PGM_MAX_8 else np.dtype('>u2')
        needed = count * sample.itemsize
        payload = data[start:start + needed]
        if len(payload) < needed:
            raise ParseError(f"PGM payload truncated: {len(payload)} of {needed} bytes",
                             line=_line_of(data, start), offset=start + len(payload))
        values = np.frombuffer(payload, dtype=sample).astype(np.int64)
    else:
        body = re.sub(rb'#[^\n]*', b'', data[start - 1:])
        tokens = body.split()
        if len(tokens) != count:
            raise ShapeError(f"PGM declares {width}x{height} = {count} values, found {len(tokens)}")
        try:
            values = np.array([int(t) for t in tokens], dtype=np.int64)
        except ValueError:
            raise ParseError("PGM body contains a non-integer value", line=_line_of(data, start))

    if (values > maxval).any():
        raise ParseError(f"PGM value exceeds maxval {maxval}")
    return values.reshape(height, width)


def _as_image(array):
    array = np.asarray(array)
    if array.ndim == 1:
        return array.reshape(1, -1)
    if array.ndim != 2:
        raise ShapeError(f"PGM images are 2-d, got an array with {array.ndim} axes")
    return array


def write_pgm(array, path, bits=16):
    """
    Write a binary PGM (P5). bits=16 stores big-endian samples with maxval 65535,
    bits=8 stores bytes with maxval 255. Values above maxval are clipped with an
    ExportWarning.
    """
    image = _as_image(array)
    if (image < 0).any():
        raise DomainError("PGM values must be nonnegative")

    maxval = PGM_MAX_16 if bits == 16 else PGM_MAX_8
    if (image > maxval).any():
        warnings.warn(f"Values above {maxval} clipped in {path}", ExportWarning)
        image = np.minimum(image, maxval)

    # Pillow writes mode I as 16-bit P5 (maxval 65535) and mode L as 8-bit
    pixels = np.ascontiguousarray(image, dtype=np.int32 if bits == 16 else np.uint8)
    Image.fromarray(pixels).save(path, format='PPM')


def write_mask(mask, path):
    """Binary mask as 8-bit PGM, 0 for false and 255 for true."""
    write_pgm(np.where(np.asarray(mask), PGM_MAX_8, 0), path, bits=8)


# ----------------------------------------------------------------------------
# Raw text
# ----------------------------------------------------------------------------

def read_raw_values(path):
    """Return (array, declared dtype) from an AMSGRID text file."""
    with open(path, 'r') as f:
        lines = f.read().splitlines()
    if not lines:
        raise ParseError("Empty grid file", line=1)

    header = lines[0].split()
    if len(header) < 2 or header[0] != RAW_MAGIC or header[1] != RAW_VERSION:
        raise ParseError(f"Expected header '{RAW_MAGIC} {RAW_VERSION} d=.. n=.. dtype=..'", line=1)

    fields = {}
    for item in header[2:]:
        key, sep, value = item.partition('=')
        if not sep:
            raise ParseError(f"Malformed header entry {item!r}", line=1)
        fields[key] = value

    try:
        d = int(fields['d'])
        n = int(fields['n'])
        dtype = fields.get('dtype', REALS)
    except (KeyError, ValueError):
        raise ParseError("Header needs integer d= and n= entries", line=1)
    if dtype not in (COUNTS, REALS):
        raise ParseError(f"Unknown dtype {dtype!r} in header", line=1)
    if d < 1 or n < 1:
        raise ShapeError(f"Header declares an empty grid (d={d}, n={n})")

    values = []
    for line_no, line in enumerate(lines[1:], start=2):
        for token in line.split():
            try:
                values.append(float(token))
            except ValueError:
                raise ParseError(f"Non-numeric value {token!r}", line=line_no)

    expected = n ** d
    if len(values) != expected:
        raise ShapeError(f"Header declares n^d = {expected} values, found {len(values)}")
    return np.asarray(values).reshape((n,) * d), dtype


def write_raw(field, path):
    """Write any field in the AMSGRID text format, one grid row per line."""
    with open(path, 'w') as f:
        f.write(f"{RAW_MAGIC} {RAW_VERSION} d={field.d} n={field.n} dtype={field.dtype}\n")
        for row in field.data.reshape(-1, field.n):
            f.write(' '.join(_format_value(v, field.dtype) for v in row) + '\n')


def write_grid(field, path, fmt=None):
    """Write a field in the format given (or implied by the extension)."""
    fmt = fmt or EXTENSIONS.get(os.path.splitext(path)[1].lower(), RAW)
    if fmt == CSV:
        write_csv(field, path)
    elif fmt == PGM:
        if field.dtype != COUNTS:
            raise ShapeError("Only count fields can be written as PGM")
        write_pgm(field.data.astype(np.int64), path, bits=16 if field.data.max() > PGM_MAX_8 else 8)
    elif fmt == RAW:
        write_raw(field, path)
    else:
        raise ParseError(f"Unknown grid format {fmt!r}")


# ----------------------------------------------------------------------------
# Region lists
# ----------------------------------------------------------------------------

REJECTION_COLUMNS = ['T_R', 'calibrated', 'threshold']


def write_regions_csv(rejections, d, path, pixel_size=None, pixel_unit='px'):
    """
    One row per significant region: t (1-based), h, cardinality, T_R,
    calibrated value and the local threshold c_|R|(eta). With a pixel size an
    area_<unit><d> column holds the region size in physical units.
    """
    header = region_header(d) + REJECTION_COLUMNS
    if pixel_size is not None:
        header.append(f"area_{pixel_unit}{d}")

    with open(path, 'w', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(header)
        for rejection in rejections:
            row = region_row(rejection.region) + [
                repr(rejection.local_stat),
                repr(rejection.calibrated),
                repr(rejection.threshold),
            ]
            if pixel_size is not None:
                row.append(repr(rejection.region.cardinality * float(pixel_size) ** d))
            writer.writerow(row)
    return len(rejections)
