#!/usr/bin/env python3
"""Run the benchmark recipes under scripts/figures/ and collect trace CSVs.

Each recipe pits sg, ssg and acsa against each other on one problem family.
``--scale`` shrinks N and K proportionally for quick smoke runs; the emitted
CSVs are ready for any plotting tool (objective vs elapsed_seconds).
"""

import argparse
import re
import sys
from pathlib import Path

from composite_sgd.cli import main as cli_main

FIGURES_DIR = Path(__file__).parent / "figures"


def scaled_text(text: str, scale: float) -> str:
    def shrink(match):
        key, value = match.group(1), int(match.group(2))
        floor = 100 if key == "N" else 50
        return f"{key} = {max(floor, int(value * scale))}"

    return re.sub(r"^(N|K) = (\d+)$", shrink, text, flags=re.MULTILINE)


def run(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--figures", nargs="*", default=None,
                        help="recipe stems to run (default: all)")
    parser.add_argument("--scale", type=float, default=1.0,
                        help="multiply N and K by this factor (smoke runs)")
    parser.add_argument("--out", default="figure_runs", help="output directory")
    args = parser.parse_args(argv)

    recipes = sorted(FIGURES_DIR.glob("*.cfg"))
    if args.figures:
        wanted = set(args.figures)
        recipes = [r for r in recipes if r.stem in wanted]
        missing = wanted - {r.stem for r in recipes}
        if missing:
            print(f"unknown figures: {sorted(missing)}", file=sys.stderr)
            return 2

    out_root = Path(args.out)
    out_root.mkdir(parents=True, exist_ok=True)
    for recipe in recipes:
        text = recipe.read_text()
        if args.scale != 1.0:
            text = scaled_text(text, args.scale)
        cfg_path = out_root / recipe.name
        cfg_path.write_text(text)
        print(f"== {recipe.stem} ==")
        code = cli_main(["run", str(cfg_path), "--out", str(out_root / recipe.stem)])
        if code != 0:
            return code
    return 0


if __name__ == "__main__":
    sys.exit(run())
