"""MetaImage (``.mhd`` + ``.raw``) subset reader and writer."""
import contextlib
import logging
import math
import os

import numpy as np

from svx import DataError, FormatError, IoError, MissingFileError
from svx.volume import LabelMap, Volume


logger = logging.getLogger(__name__)


_ELEMENT_TYPES = {
    'MET_FLOAT': np.dtype('<f4'),
    'MET_UCHAR': np.dtype('u1'),
    'MET_UINT': np.dtype('<u4'),
}

_REQUIRED_KEYS = ('NDims', 'DimSize', 'ElementType', 'ElementDataFile')

# written by common MetaImage tools; accepted and ignored
_IGNORED_KEYS = ('ObjectType', 'BinaryData', 'Offset', 'TransformMatrix', 'CenterOfRotation',
                 'AnatomicalOrientation')

_KNOWN_KEYS = _REQUIRED_KEYS + _IGNORED_KEYS + (
    'ElementSpacing', 'Channels', 'ElementByteOrderMSB', 'BinaryDataByteOrderMSB', 'CompressedData')


def parse_header(text, path='<header>'):
    header = {}
    for number, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        key, separator, value = line.partition('=')
        key = key.strip()
        if not separator or not key:
            raise FormatError('{}:{}: expected "key = value", got {!r}'.format(path, number, line))
        if key not in _KNOWN_KEYS:
            raise FormatError('{}:{}: unknown header key "{}"'.format(path, number, key))
        header[key] = value.strip()

    missing = [key for key in _REQUIRED_KEYS if key not in header]
    if missing:
        raise FormatError('{}: missing header keys {}'.format(path, ', '.join(missing)))
    return header


def _numbers(header, key, convert, count, path):
    try:
        values = tuple(convert(item) for item in header[key].split())
    except ValueError:
        raise FormatError('{}: invalid value for {}: {!r}'.format(path, key, header[key]))
    if len(values) != count:
        raise FormatError('{}: {} needs {} values, got {}'.format(path, key, count, len(values)))
    return values


def _is_false(value):
    return value.lower() in ('false', '0')


def read_image(path):
    """Read a header and its raw file into a `Volume` (float) or a `LabelMap` (unsigned)."""
    if not os.path.exists(path):
        raise MissingFileError(path)

    with open(path, 'r', encoding='utf-8') as f:
        header = parse_header(f.read(), path)

    if _numbers(header, 'NDims', int, 1, path) != (3,):
        raise FormatError('{}: only NDims = 3 is supported'.format(path))
    dims = _numbers(header, 'DimSize', int, 3, path)
    if min(dims) < 1:
        raise FormatError('{}: DimSize must be positive, got {}'.format(path, dims))
    spacing = _numbers(header, 'ElementSpacing', float, 3, path) if 'ElementSpacing' in header else (1.0, 1.0, 1.0)
    if not all(s > 0 and math.isfinite(s) for s in spacing):
        raise FormatError('{}: ElementSpacing must be positive and finite, got {}'.format(path, spacing))
    channels = _numbers(header, 'Channels', int, 1, path)[0] if 'Channels' in header else 1
    if channels < 1:
        raise FormatError('{}: Channels must be >= 1'.format(path))

    for key in ('ElementByteOrderMSB', 'BinaryDataByteOrderMSB', 'CompressedData'):
        if key in header and not _is_false(header[key]):
            raise FormatError('{}: {} = {} is not supported'.format(path, key, header[key]))

    element_type = header['ElementType']
    if element_type not in _ELEMENT_TYPES:
        raise FormatError('{}: unsupported ElementType {}'.format(path, element_type))
    dtype = _ELEMENT_TYPES[element_type]

    data_file = header['ElementDataFile']
    if data_file.upper() in ('LOCAL', 'LIST'):
        raise FormatError('{}: ElementDataFile = {} is not supported'.format(path, data_file))
    data_path = os.path.join(os.path.dirname(path), data_file)
    if not os.path.exists(data_path):
        raise MissingFileError(data_path)

    nx, ny, nz = dims
    expected = channels * nx * ny * nz * dtype.itemsize
    actual = os.path.getsize(data_path)
    if actual != expected:
        raise FormatError('{}: data file has {} bytes, header implies {}'.format(data_path, actual, expected))

    raw = np.fromfile(data_path, dtype=dtype).reshape(channels, nz, ny, nx).transpose(0, 3, 2, 1)

    if dtype.kind == 'f':
        if not np.all(np.isfinite(raw)):
            raise DataError('{}: data contains non-finite samples'.format(data_path))
        return Volume(raw, spacing)

    if channels != 1:
        raise FormatError('{}: label maps must have a single channel'.format(path))
    return LabelMap(raw[0].astype(np.int64), spacing)


def _format_header(image, dims, channels, element_type, data_file):
    lines = [
        'ObjectType = Image',
        'NDims = 3',
        'DimSize = {} {} {}'.format(*dims),
        'ElementSpacing = {!r} {!r} {!r}'.format(*image.spacing),
        'Channels = {}'.format(channels),
        'ElementType = {}'.format(element_type),
        'ElementByteOrderMSB = False',
        'ElementDataFile = {}'.format(data_file),
    ]
    return '\n'.join(lines) + '\n'


def data_file_path(path):
    return os.path.splitext(path)[0] + '.raw'


@contextlib.contextmanager
def open_output(path):
    """Text stream for ``path``; failing to create it raises `IoError`."""
    try:
        f = open(path, 'w', encoding='utf-8')
    except (IOError, OSError) as e:
        raise IoError('Cannot write "{}": {}'.format(path, e))
    with f:
        yield f


def make_output_dir(path):
    if os.path.isdir(path):
        return
    try:
        os.makedirs(path)
    except (IOError, OSError) as e:
        raise IoError('Cannot create directory "{}": {}'.format(path, e))


def write_image(image, path):
    """Write a `Volume` as MET_FLOAT or a `LabelMap` as MET_UINT."""
    directory = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(directory):
        raise IoError('Output directory "{}" does not exist.'.format(directory))

    if isinstance(image, Volume):
        payload = image.data.astype('<f4')
        element_type = 'MET_FLOAT'
    elif isinstance(image, LabelMap):
        if image.labels.size and image.labels.max() > np.iinfo(np.uint32).max:
            raise DataError('Label values exceed the MET_UINT range.')
        payload = image.labels.astype('<u4')[np.newaxis]
        element_type = 'MET_UINT'
    else:
        raise TypeError('Cannot write {!r}'.format(image))

    channels = payload.shape[0]
    data_path = data_file_path(path)
    header = _format_header(image, payload.shape[1:], channels, element_type, os.path.basename(data_path))

    try:
        with open(data_path, 'wb') as f:
            f.write(np.ascontiguousarray(payload.transpose(0, 3, 2, 1)).tobytes())
        with open(path, 'w', encoding='utf-8') as f:
            f.write(header)
    except (IOError, OSError) as e:
        raise IoError('Cannot write "{}": {}'.format(path, e))
    logger.debug('Wrote %s (%s, %s)', path, element_type, 'x'.join(str(d) for d in payload.shape[1:]))
