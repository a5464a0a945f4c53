"""Shared output helpers for the experiment scripts."""

import argparse
from pathlib import Path


def parser(description):
    p = argparse.ArgumentParser(description=description)
    p.add_argument("--out", default="results", help="output directory (default: results)")
    return p


def out_dir(args):
    path = Path(args.out)
    path.mkdir(parents=True, exist_ok=True)
    return path
