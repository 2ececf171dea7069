"""Regenerate the --help snapshots: python tests/snapshots/regen.py"""

import contextlib
import io
from pathlib import Path

from vstkit.cli import main

SUBCOMMANDS = ["simulate", "batch", "analyze", "compare", "serve", "export", "replay"]

if __name__ == "__main__":
    out_dir = Path(__file__).parent
    for sub in SUBCOMMANDS:
        buffer = io.StringIO()
        with contextlib.redirect_stdout(buffer):
            main([sub, "--help"])
        (out_dir / f"help_{sub}.txt").write_text(buffer.getvalue())
        print(f"wrote help_{sub}.txt")
