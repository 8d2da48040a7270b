import os, json, re
from typing import Any, Iterable
from urllib.parse import quote, unquote

import config
from utils.errors import ValidationError


def format_float(value: float, digits: int = config.FLOAT_SIGNIFICANT_DIGITS) -> float:
    """Round to ``digits`` significant digits so every writer serializes the same number."""
    if value == 0:
        return 0.0
    return float(f"{value:.{digits}g}")


def escape_part(part: Any) -> str:
    return quote(str(part), safe='')


def make_id(*parts: Any) -> str:
    return "/".join(escape_part(p) for p in parts)


def id_label(identifier: str) -> str:
    # Last segment of a minted id, unescaped
    return unquote(str(identifier).rsplit('/', 1)[-1])


def sanitize_filename(filename: str) -> str:
    filename = re.sub(r'[<>:"/\\|?*%\s]', '_', filename).strip(' .')
    return filename[:200]


def ensure_directory_exists(path: str):
    if path:
        os.makedirs(path, exist_ok=True)


def read_text_file(path: str) -> str:
    try:
        with open(path, 'r', encoding='utf-8') as f:
            return f.read()
    except OSError as e:
        raise ValidationError(f"cannot read file: {e.strerror}", source=path)


def read_json_file(path: str) -> Any:
    text = read_text_file(path)
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ValidationError(f"invalid JSON: {e.msg}", source=path, line=e.lineno)


def dump_json(data: Any) -> str:
    return json.dumps(data, indent=2, ensure_ascii=False) + "\n"


def write_json_file(path: str, data: Any):
    write_text_file(path, dump_json(data))


def write_text_file(path: str, text: str):
    ensure_directory_exists(os.path.dirname(path))
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        f.write(text)


def mean(values: Iterable[float]) -> float:
    values = list(values)
    return sum(values) / len(values) if values else 0.0
