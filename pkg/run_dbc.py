#!/usr/bin/env python
"""
Run the diffusion-guided behavioral cloning pipeline.

Usage:
    python run_dbc.py gen-demos --out runs/maze
    python run_dbc.py train-dm --out runs/maze
    python run_dbc.py train-policy --out runs/maze
    python run_dbc.py eval --method dbc --band eval --out runs/maze
    python run_dbc.py sweep --config configs/maze.cfg --out runs/maze
"""
import sys

from src.harness.cli import main

if __name__ == "__main__":
    sys.exit(main())
