"""Rebuild the bundled snapshot from Our World in Data's public CSV exports.

Needs network access. Pulls per-capita CO2 from the CO2 dataset and primary
consumption of gas, coal and oil (TWh) from the energy dataset, keeps one
country and year range, and writes the toolkit's CSV layout plus a
metadata file recording the retrieval date.

    python scripts/refresh_data.py --country Taiwan --start 1965 --end 2022
"""
from __future__ import annotations

import argparse
import csv
import datetime as dt
import io
import json
import urllib.request
from pathlib import Path

from emforecast.series import CSV_HEADER, read_csv

CO2_URL = "https://raw.githubusercontent.com/owid/co2-data/master/owid-co2-data.csv"
ENERGY_URL = "https://raw.githubusercontent.com/owid/energy-data/master/owid-energy-data.csv"
SOURCE_COLUMNS = {
    "co2_per_capita": (CO2_URL, "co2_per_capita"),
    "gas_twh": (ENERGY_URL, "gas_consumption"),
    "coal_twh": (ENERGY_URL, "coal_consumption"),
    "oil_twh": (ENERGY_URL, "oil_consumption"),
}
DATA_DIR = Path(__file__).resolve().parents[1] / "src" / "emforecast" / "data"


def fetch_rows(url: str, country: str) -> dict[int, dict]:
    with urllib.request.urlopen(url, timeout=60) as resp:
        text = resp.read().decode("utf-8")
    return {int(r["year"]): r for r in csv.DictReader(io.StringIO(text)) if r["country"] == country}


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--country", default="Taiwan")
    ap.add_argument("--start", type=int, default=1965)
    ap.add_argument("--end", type=int, default=2022)
    ap.add_argument("--out", type=Path, default=DATA_DIR / "snapshot.csv")
    args = ap.parse_args(argv)
    cache = {url: fetch_rows(url, args.country) for url in {u for u, _ in SOURCE_COLUMNS.values()}}
    lines = [",".join(CSV_HEADER)]
    for year in range(args.start, args.end + 1):
        vals = []
        for name in CSV_HEADER[1:]:
            url, col = SOURCE_COLUMNS[name]
            cell = cache[url].get(year, {}).get(col, "")
            if cell == "":
                raise SystemExit(f"{args.country} {year}: no value for {col}")
            vals.append(cell)
        lines.append(",".join([str(year)] + vals))
    args.out.write_text("\n".join(lines) + "\n", encoding="utf-8")
    read_csv(args.out)  # validate
    today = dt.date.today().isoformat()
    meta = {"vintage": f"owid-{today}", "retrieved": today, "country": args.country,
            "sources": [CO2_URL, ENERGY_URL], "years": [args.start, args.end]}
    args.out.with_name("snapshot_meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
