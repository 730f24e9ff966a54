"""Convert University of Wyoming TEXT:LIST sounding dumps to the sounding CSV format."""
import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from services.logging_service import get_logging_service  # noqa: E402
from services.synth_service import wyoming_to_csv  # noqa: E402
from utils.errors import HabStationError  # noqa: E402


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("dumps", nargs="+", help="saved TEXT:LIST pages")
    parser.add_argument("--out", default=".", help="directory for STATIONID_YYYYMMDDHH.csv files")
    parser.add_argument("--station", help="station id when the dump lacks a 'Station number' line")
    args = parser.parse_args()

    logger = get_logging_service()
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    failures = 0
    for dump in args.dumps:
        try:
            name, text = wyoming_to_csv(Path(dump).read_text(encoding="utf-8"), station_id=args.station)
        except HabStationError as e:
            logger.warning(f"Skipped {dump}: {e}")
            failures += 1
            continue
        (out_dir / name).write_text(text, encoding="utf-8")
        print(f"{dump} -> {out_dir / name}")
    return 3 if failures == len(args.dumps) else 0


if __name__ == "__main__":
    sys.exit(main())
