"""Helpers for end-to-end CLI runs over synthetic inputs."""

from __future__ import annotations

import contextlib
import hashlib
import io
from pathlib import Path

from newsnet import cli
from newsnet.fixtures import FixtureSpec, generate, write_fixture


def fixture_inputs(directory: Path, spec: FixtureSpec | None = None) -> dict[str, Path]:
    return write_fixture(generate(spec or FixtureSpec()), directory)


def input_args(paths: dict[str, Path]) -> list[str]:
    return [arg for key in cli.INPUT_KEYS for arg in (f"--{key}", str(paths[key]))]


def run_cli(argv: list[str]) -> tuple[int, str, str]:
    out, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        try:
            rc = cli.main(argv)
        except SystemExit as exc:
            rc = int(exc.code)
    return rc, out.getvalue(), err.getvalue()


def run_pipeline(paths: dict[str, Path], out: Path, *extra: str) -> int:
    rc, _, err = run_cli(["--out", str(out), *input_args(paths), *extra, "run"])
    assert rc == 0, err
    return rc


def tree_digest(root: Path) -> dict[str, str]:
    return {str(p.relative_to(root)): hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(root.rglob("*")) if p.is_file()}


def data_lines(path: Path) -> list[str]:
    """Lines after the config-hash line."""
    lines = path.read_text().splitlines()
    assert lines[0].startswith("#config_hash="), path
    return lines[1:]
