#!/usr/bin/env python3
"""Run the andersen CLI from a checkout without installing the package"""
import sys
import os

# Check if we're using the venv's Python (handle both python and python3)
project_root = os.path.dirname(os.path.abspath(__file__))
venv_python = os.path.join(project_root, ".venv", "bin", "python")
venv_python3 = os.path.join(project_root, ".venv", "bin", "python3")
venv_exists = os.path.exists(venv_python) or os.path.exists(venv_python3)

if venv_exists and ".venv" not in sys.executable:
    print(f"Warning: Using {sys.executable} instead of venv Python", file=sys.stderr, flush=True)
    print("Please run: uv run python run_andersen.py ...", file=sys.stderr, flush=True)

try:
    import numpy  # noqa: F401
    import scipy  # noqa: F401
except ImportError:
    print("ERROR: numpy/scipy are not installed!", file=sys.stderr, flush=True)
    print("Please install dependencies with: uv sync", file=sys.stderr, flush=True)
    sys.exit(1)

sys.path.insert(0, project_root)

if __name__ == "__main__":
    from andersen.cli import run

    sys.exit(run(sys.argv[1:]))
