"""Turn a dataclass of defaults into an argparse command line."""

import argparse
import json
from dataclasses import MISSING, asdict, fields


def parse_config(cls, description: str):
    ap = argparse.ArgumentParser(description=description)
    for f in fields(cls):
        default = f.default_factory() if f.default is MISSING else f.default
        flag = "--" + f.name.replace("_", "-")
        if isinstance(default, bool):
            ap.add_argument(flag, type=lambda s: s.lower() in ("1", "true", "yes"), default=default)
        elif isinstance(default, list):
            ap.add_argument(flag, type=type(default[0]) if default else float, nargs="+", default=default)
        else:
            ap.add_argument(flag, type=type(default), default=default)
    return cls(**vars(ap.parse_args()))


def dump(cfg, result, path):
    with open(path, "w") as fh:
        json.dump({"config": asdict(cfg), "result": result}, fh, indent=2, default=str)
