#!/usr/bin/env python3
"""
Recipe Runner
Replays every experiment file in recipes/ through the CLI
"""

import json
import sys
from pathlib import Path

from dotenv import load_dotenv

from src.cli import main

load_dotenv()

RECIPES = Path(__file__).parent / "recipes"


def run_all(pattern: str = "*.json") -> int:
    failures = []
    recipes = sorted(RECIPES.glob(pattern))
    print("=" * 80)
    print(f"REPLAYING {len(recipes)} RECIPE(S)")
    print("=" * 80)
    for recipe in recipes:
        command = json.loads(recipe.read_text(encoding="utf-8"))["command"]
        print(f"\n▶ {recipe.stem} ({command})")
        code = main([command, "--config", str(recipe)])
        if code != 0:
            failures.append(recipe.stem)
            print(f"   ✗ exit code {code}")

    print("\n" + "=" * 80)
    if failures:
        print(f"✗ {len(failures)} recipe(s) failed: {', '.join(failures)}")
        return 1
    print(f"✓ All {len(recipes)} recipes completed")
    return 0


if __name__ == "__main__":
    sys.exit(run_all(sys.argv[1] if len(sys.argv) > 1 else "*.json"))
