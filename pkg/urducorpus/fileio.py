import hashlib
import logging
import os
import tempfile

from tenacity import retry, retry_if_exception_type, stop_after_attempt, wait_fixed

from urducorpus.errors import InputError

logger = logging.getLogger(__name__)


@retry(
    retry=retry_if_exception_type(PermissionError),
    stop=stop_after_attempt(5),
    wait=wait_fixed(0.2),
    reraise=True
)
def _replace(src, dst):
    # Windows keeps a short lock on files that were just closed
    os.replace(src, dst)


def atomic_write_bytes(path, data):
    """Write bytes to path through a temporary file in the same directory"""
    directory = os.path.dirname(os.path.abspath(path))
    try:
        os.makedirs(directory, exist_ok=True)
        fd, tmp_path = tempfile.mkstemp(prefix='.tmp-', dir=directory)
        try:
            with os.fdopen(fd, 'wb') as f:
                f.write(data)
            _replace(tmp_path, path)
        except BaseException:
            if os.path.exists(tmp_path):
                os.remove(tmp_path)
            raise
    except OSError as e:
        logger.error(f"Error writing {path}: {str(e)}")
        raise InputError(f"cannot write {path}: {e}") from e
    logger.debug(f"Wrote {len(data)} bytes to {path}")


def atomic_write_text(path, text):
    atomic_write_bytes(path, text.encode('utf-8'))


def read_text(path):
    """Read a UTF-8 file, mapping filesystem problems to InputError"""
    try:
        with open(path, 'r', encoding='utf-8', newline='') as f:
            return f.read()
    except FileNotFoundError as e:
        raise InputError(f"file not found: {path}") from e
    except UnicodeDecodeError as e:
        raise InputError(f"{path} is not valid UTF-8: {e}") from e
    except OSError as e:
        raise InputError(f"cannot read {path}: {e}") from e


def read_bytes(path):
    try:
        with open(path, 'rb') as f:
            return f.read()
    except FileNotFoundError as e:
        raise InputError(f"file not found: {path}") from e
    except OSError as e:
        raise InputError(f"cannot read {path}: {e}") from e


def sha256_file(path, chunk_size=1 << 20):
    digest = hashlib.sha256()
    with open(path, 'rb') as f:
        for block in iter(lambda: f.read(chunk_size), b''):
            digest.update(block)
    return digest.hexdigest()
