"""Advisory lookup tables: plant protection, nutrient management, officer contacts.

Three CSV files (UTF-8, header row, RFC-4180 quoting) with bit-exact headers:
  plant_protection.csv  crop,disease,remedy
  nutrient.csv          crop,nutrient,remedy
  officers.csv          role,city,phone,mail

Keys are trimmed and lowercased identically at load and query time; lookups
are exact and return None when the row is absent (that drives the
data-unavailable reply, it is not an error).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .errors import (BadHeader, DuplicateKey, EmptyField, FieldTooLong,
                     MalformedLine, MissingFile)

PLANT_PROTECTION_FILE = "plant_protection.csv"
NUTRIENT_FILE = "nutrient.csv"
OFFICERS_FILE = "officers.csv"
KB_FILES = (PLANT_PROTECTION_FILE, NUTRIENT_FILE, OFFICERS_FILE)

# per-field character limits
_LIMITS = {
    PLANT_PROTECTION_FILE: {"crop": 30, "disease": 60, "remedy": 255},
    NUTRIENT_FILE: {"crop": 30, "nutrient": 60, "remedy": 255},
    OFFICERS_FILE: {"role": 50, "city": 30, "phone": 38, "mail": 50},
}
_HEADERS = {
    PLANT_PROTECTION_FILE: ["crop", "disease", "remedy"],
    NUTRIENT_FILE: ["crop", "nutrient", "remedy"],
    OFFICERS_FILE: ["role", "city", "phone", "mail"],
}
# mail may be blank; everything else is mandatory
_OPTIONAL = {OFFICERS_FILE: {"mail"}}


def _norm(s: str) -> str:
    return s.strip().lower()


@dataclass(frozen=True)
class KnowledgeBase:
    plant_protection: dict[tuple[str, str], str]
    nutrient: dict[tuple[str, str], str]
    officers: dict[tuple[str, str], tuple[str, str]]

    def counts(self) -> dict[str, int]:
        return {"plant_protection": len(self.plant_protection),
                "nutrient": len(self.nutrient),
                "officers": len(self.officers)}


def _read_rows(directory: Path, name: str) -> list[dict[str, str]]:
    path = directory / name
    if not path.is_file():
        raise MissingFile(str(path))
    expected = _HEADERS[name]
    optional = _OPTIONAL.get(name, set())
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise BadHeader(name, ",".join(expected), "") from None
        if header != expected:
            raise BadHeader(name, ",".join(expected), ",".join(header))
        rows = []
        for row_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(expected):
                raise MalformedLine(row_no, f"{name}: expected {len(expected)} fields")
            record = dict(zip(expected, row))
            for field, value in record.items():
                limit = _LIMITS[name][field]
                if len(value) > limit:
                    raise FieldTooLong(name, row_no, field, limit)
                if not value.strip() and field not in optional:
                    raise EmptyField(name, row_no, field)
            record["_row"] = row_no
            rows.append(record)
        return rows


def load_kb(directory: str | Path) -> KnowledgeBase:
    directory = Path(directory)

    plant: dict[tuple[str, str], str] = {}
    for rec in _read_rows(directory, PLANT_PROTECTION_FILE):
        key = (_norm(rec["crop"]), _norm(rec["disease"]))
        if key in plant:
            raise DuplicateKey(PLANT_PROTECTION_FILE, rec["_row"], key)
        plant[key] = rec["remedy"]

    nutrient: dict[tuple[str, str], str] = {}
    for rec in _read_rows(directory, NUTRIENT_FILE):
        key = (_norm(rec["crop"]), _norm(rec["nutrient"]))
        if key in nutrient:
            raise DuplicateKey(NUTRIENT_FILE, rec["_row"], key)
        nutrient[key] = rec["remedy"]

    officers: dict[tuple[str, str], tuple[str, str]] = {}
    for rec in _read_rows(directory, OFFICERS_FILE):
        key = (_norm(rec["role"]), _norm(rec["city"]))
        if key in officers:
            raise DuplicateKey(OFFICERS_FILE, rec["_row"], key)
        officers[key] = (rec["phone"], rec["mail"])

    return KnowledgeBase(plant_protection=plant, nutrient=nutrient, officers=officers)


def query_plant_protection(kb: KnowledgeBase, crop: str, disease: str) -> Optional[str]:
    return kb.plant_protection.get((_norm(crop), _norm(disease)))


def query_nutrient(kb: KnowledgeBase, crop: str, nutrient: str) -> Optional[str]:
    return kb.nutrient.get((_norm(crop), _norm(nutrient)))


def query_officer(kb: KnowledgeBase, role: str, city: str) -> Optional[tuple[str, str]]:
    return kb.officers.get((_norm(role), _norm(city)))
