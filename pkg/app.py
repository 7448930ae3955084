"""Command-line entry point for the quantum-jump calorimetry simulator.

Usage:
    python app.py rates --beta-hw 0.5
    python app.py ensemble --config configs/finite_temperature.json --workers 4
    python app.py guardian --beta-hw inf --prob-e 0.1 --n 100
    python app.py calorimeter --tau-ratio 100,1,0.01 --n 100
"""

import sys

from src.cli import main

if __name__ == "__main__":
    sys.exit(main())
