"""Noise concentration rate plus the quantization and centering checks."""
from __future__ import annotations

import sys

from graphon_cocluster.cli import main

if __name__ == "__main__":
    sys.exit(main(["lemma-suite", "--set", "K=3", "--set", "reps=5", "--out", "out/lemma", *sys.argv[1:]]))
