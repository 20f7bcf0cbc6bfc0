import sys
from pathlib import Path

# test modules import shared oracles from each other (finite differences,
# brute-force attention); make that work regardless of invocation dir
sys.path.insert(0, str(Path(__file__).parent))
