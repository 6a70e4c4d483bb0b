from __future__ import annotations

import os
from typing import IO, Any, Union

import yaml

# str is deliberately not accepted as a path: it is too easy to confuse with content
ByteSource = Union[bytes, bytearray, IO[bytes], "os.PathLike[str]"]


def read_bytes(src: ByteSource) -> bytes:
    if isinstance(src, (bytes, bytearray)):
        return bytes(src)
    if isinstance(src, os.PathLike):
        with open(src, "rb") as fh:
            return fh.read()
    return src.read()


def source_name(src: ByteSource, default: str = "<stream>") -> str:
    if isinstance(src, os.PathLike):
        return os.path.basename(os.fspath(src))
    name = getattr(src, "name", None)
    return os.path.basename(name) if isinstance(name, str) else default


def decode_text(data: bytes) -> tuple[str, bool]:
    """UTF-8 decode with replacement; second item is True if bytes were replaced."""
    if data.startswith(b"\xef\xbb\xbf"):
        data = data[3:]
    try:
        return data.decode("utf-8"), False
    except UnicodeDecodeError:
        return data.decode("utf-8", errors="replace"), True


class _Loader(yaml.SafeLoader):
    """SafeLoader that leaves dates and times as strings."""


_Loader.yaml_implicit_resolvers = {
    ch: [(tag, rx) for tag, rx in resolvers if tag != "tag:yaml.org,2002:timestamp"]
    for ch, resolvers in yaml.SafeLoader.yaml_implicit_resolvers.items()
}


def load_document(src: ByteSource) -> Any:
    """Parse a declarative YAML (or JSON, which YAML accepts) document."""
    text, _ = decode_text(read_bytes(src))
    return yaml.load(text, Loader=_Loader)
