""" The headered little-endian layout shared by every binary artifact:
    4-byte magic, u32 version, then a format-specific body.

    Most formats use the generic container body: a length-prefixed JSON
    metadata block followed by raw array payloads in the order listed there.
"""

import json
import logging
import struct

import numpy as np

from .errors import CorruptHeaderError, TruncatedFileError, VersionMismatchError

VERSION = 1

class Reader():
  """ Sequential reader over the bytes of one file, raising TruncatedFileError at the end.
      >>> r = Reader(b'abc')
      >>> r.take(2)
      b'ab'
      >>> r.take(2)
      Traceback (most recent call last):
      ...
      nca.errors.TruncatedFileError: File ends after 3 bytes; needed 2 more at offset 2
  """
  def __init__(self, data):
    self.data = data
    self.pos = 0

  def take(self, n):
    if self.pos + n > len(self.data):
      raise TruncatedFileError("File ends after %s bytes; needed %s more at offset %s"
        % (len(self.data), n, self.pos))
    chunk = self.data[self.pos:self.pos + n]
    self.pos += n
    return chunk

  def unpack(self, fmt):
    values = struct.unpack(fmt, self.take(struct.calcsize(fmt)))
    return values[0] if len(values) == 1 else values

  def array(self, dtype, shape):
    dtype = np.dtype(dtype).newbyteorder('<')
    count = int(np.prod(shape, dtype=np.int64))
    raw = self.take(count * dtype.itemsize)
    return np.frombuffer(raw, dtype=dtype).reshape(shape).astype(dtype.newbyteorder('='))

  def json(self):
    length = self.unpack('<I')
    return json.loads(self.take(length).decode('utf-8'))

  def atEnd(self):
    return self.pos == len(self.data)

def header(magic, version=VERSION):
  return struct.pack('<4sI', magic, version)

def readHeader(reader, magic, version=VERSION):
  """ Check the magic and version at the reader's position.
      >>> readHeader(Reader(header(b'NCAT')), b'NCAM')
      Traceback (most recent call last):
      ...
      nca.errors.CorruptHeaderError: Expected a NCAM file, found magic b'NCAT'
      >>> readHeader(Reader(header(b'NCAM', 7)), b'NCAM')
      Traceback (most recent call last):
      ...
      nca.errors.VersionMismatchError: NCAM file has version 7; this build reads version 1
  """
  try:
    found = reader.take(4)
  except TruncatedFileError:
    raise CorruptHeaderError("File is too short to hold a %s header" % magic.decode())
  if found != magic:
    raise CorruptHeaderError("Expected a %s file, found magic %r" % (magic.decode(), found))
  found = reader.unpack('<I')
  if found != version:
    raise VersionMismatchError("%s file has version %s; this build reads version %s"
      % (magic.decode(), found, version))

def packJson(obj):
  raw = json.dumps(obj, sort_keys=True).encode('utf-8')
  return struct.pack('<I', len(raw)) + raw

def packArray(array, dtype):
  return np.ascontiguousarray(array, dtype=np.dtype(dtype).newbyteorder('<')).tobytes()

def writeContainer(path, magic, meta, arrays):
  """ Write meta (a JSON-able dict) and named arrays.
      Arrays keep their float width; anything else is stored as float32.
  """
  layout = []
  payload = []
  for name, array in arrays.items():
    array = np.asarray(array)
    dtype = 'f8' if array.dtype == np.float64 else 'f4'
    layout.append({'name': name, 'shape': list(array.shape), 'dtype': dtype})
    payload.append(packArray(array, dtype))
  body = dict(meta)
  body['arrays'] = layout
  with open(path, 'wb') as f:
    f.write(header(magic))
    f.write(packJson(body))
    for chunk in payload:
      f.write(chunk)
  logging.debug("Wrote %s container %s (%s arrays)", magic.decode(), path, len(layout))

def readContainer(path, magic):
  """ Returns (meta, arrays) as written by writeContainer. """
  with open(path, 'rb') as f:
    reader = Reader(f.read())
  readHeader(reader, magic)
  try:
    meta = reader.json()
  except (ValueError, UnicodeDecodeError) as e:
    raise CorruptHeaderError("Unreadable metadata block in %s: %s" % (path, e))
  arrays = {}
  for entry in meta.pop('arrays'):
    arrays[entry['name']] = reader.array(entry['dtype'], tuple(entry['shape']))
  return meta, arrays
