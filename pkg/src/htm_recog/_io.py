import os


def write_bytes(path, payload: bytes) -> None:
    """Write ``payload`` to ``path``, creating parent directories."""
    parent = os.path.dirname(os.fspath(path))
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(payload)
