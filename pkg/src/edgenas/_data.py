"""Locations of packaged data files."""

from pathlib import Path

DATA_DIR = Path(__file__).resolve().parent / "data"
TABLE1_SPACE_PATH = DATA_DIR / "table1_space.json"
PAPER_TABLES_PATH = DATA_DIR / "paper_tables.json"
PROFILES_DIR = DATA_DIR / "profiles"
