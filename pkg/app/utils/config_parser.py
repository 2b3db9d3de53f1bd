"""
key = value 설정 파일 파서

- 점으로 구분된 키(reaction.chi = 1.0)를 중첩 dict 로 접어 RunConfig 로 검증
- run.* 키는 RunConfig 최상위(출력 디렉터리, 저장 주기), 나머지는 SimParams
- 검증 오류는 점 경로로 바꿔 ConfigError 하나로 모아서 보고
"""
import io
from pathlib import Path
from typing import Any, Dict, List, Union

from dotenv import dotenv_values
from pydantic import BaseModel, ValidationError

from app.exceptions import ConfigError
from app.models.params import RunConfig

RUN_PREFIX = "run"
RUN_KEYS = ("scenario", "output_dir", "snapshot_every", "record_every", "checkpoint_every")


def _read_source(source: Union[str, Path]) -> str:
    if isinstance(source, Path) or ("\n" not in source and "=" not in source):
        path = Path(source)
        try:
            return path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return source


def _insert(tree: Dict[str, Any], parts: List[str], value: str, key: str, errors: List[str]) -> None:
    node = tree
    for part in parts[:-1]:
        child = node.setdefault(part, {})
        if not isinstance(child, dict):
            errors.append(f"{key}: conflicts with scalar key {part}")
            return
        node = child
    if isinstance(node.get(parts[-1]), dict):
        errors.append(f"{key}: conflicts with nested keys")
        return
    node[parts[-1]] = value


def _error_path(loc) -> str:
    parts = [str(p) for p in loc]
    if parts and parts[0] == "params":
        return ".".join(parts[1:]) or "params"
    return ".".join([RUN_PREFIX] + parts)


def _describe(err: Dict[str, Any]) -> str:
    message = "unknown key" if err["type"] == "extra_forbidden" else err["msg"]
    return f"{_error_path(err['loc'])}: {message}"


def parse_config_text(text: str) -> RunConfig:
    values = dotenv_values(stream=io.StringIO(text), interpolate=False)
    tree: Dict[str, Any] = {}
    errors: List[str] = []
    for key, value in values.items():
        if value is None:
            errors.append(f"{key}: missing value")
            continue
        parts = key.split(".")
        if any(not p for p in parts):
            errors.append(f"{key}: malformed key")
            continue
        if parts[0] == RUN_PREFIX:
            if len(parts) != 2 or parts[1] == "params":
                errors.append(f"{key}: unknown key")
                continue
            _insert(tree, parts[1:], value, key, errors)
        else:
            _insert(tree.setdefault("params", {}), parts, value, key, errors)
    if errors:
        raise ConfigError("invalid config", errors)
    try:
        return RunConfig.model_validate(tree)
    except ValidationError as exc:
        raise ConfigError("invalid config", [_describe(e) for e in exc.errors()]) from exc


def parse_config(source: Union[str, Path]) -> RunConfig:
    """파일 경로 또는 설정 텍스트를 RunConfig 로 변환"""
    return parse_config_text(_read_source(source))


def _format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (tuple, list)):
        return ", ".join(_format_value(v) for v in value)
    return str(value)


def _flatten(model: BaseModel, prefix: str = "") -> List[str]:
    lines = []
    for name in type(model).model_fields:
        value = getattr(model, name)
        key = f"{prefix}{name}"
        if value is None:
            continue
        if isinstance(value, BaseModel):
            lines.extend(_flatten(value, key + "."))
        else:
            lines.append(f"{key} = {_format_value(value)}")
    return lines


def dump_config(config: RunConfig) -> str:
    """parse_config 로 다시 읽으면 같은 RunConfig 가 되는 텍스트"""
    lines = [
        f"{RUN_PREFIX}.{key} = {_format_value(getattr(config, key))}"
        for key in RUN_KEYS
        if getattr(config, key) is not None
    ]
    lines.extend(_flatten(config.params))
    return "\n".join(lines) + "\n"
