"""
GridThreat - Main Application Entry Point

Formal false data injection attack analysis against security-constrained
optimal power flow:
- DC power flow and line outage distribution factors
- WLS state estimation with residual-based bad data detection
- N-1 secure least-cost dispatch
- Stealthy attack synthesis with an exhaustive Unsat certificate
- Independent replay of attack vectors
- Attack-space sweeps over attacker capabilities and defences

Run with: python main.py <subcommand> --case <file or fixture name>
Help: python main.py --help
"""

import sys

from app.cli import main

if __name__ == "__main__":
    sys.exit(main())
