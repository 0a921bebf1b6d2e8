"""Build an argument parser from a dataclass of experiment settings."""

from __future__ import annotations

import argparse
from dataclasses import MISSING, fields


def parse_into(cls, description: str, argv=None):
    ap = argparse.ArgumentParser(description=description)
    for f in fields(cls):
        default = f.default if f.default is not MISSING else f.default_factory()
        flag = f"--{f.name.replace('_', '-')}"
        if isinstance(default, tuple):
            kind = type(default[0]) if default else float
            ap.add_argument(flag, type=kind, nargs="+", default=list(default))
        elif isinstance(default, bool):
            ap.add_argument(flag, action=argparse.BooleanOptionalAction, default=default)
        else:
            ap.add_argument(flag, type=type(default), default=default)
    ns = vars(ap.parse_args(argv))
    return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in ns.items()})
