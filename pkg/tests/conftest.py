import sys
from pathlib import Path

# make sibling helper modules (oracles, gradcheck_lib) importable
sys.path.insert(0, str(Path(__file__).resolve().parent))
