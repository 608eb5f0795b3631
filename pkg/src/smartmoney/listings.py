"""Shopping-list documents: the JSON a seller submits to raise an invoice."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

from . import contracts
from .errors import ParseError, RateMismatch
from .model import ItemLine

log = logging.getLogger(__name__)

_LINE_FIELDS = {"item": str, "price": int, "quantity": int, "vatRate": int}


@dataclass(frozen=True)
class ShoppingListDocument:
    buyer: str
    seller: str
    lines: tuple[ItemLine, ...]
    # Carried through for display only; amounts are always recomputed.
    amount: int | None = None

    def to_record(self) -> dict:
        return {
            "amount": self.amount,
            "buyer": self.buyer,
            "shoppingList": [ln.to_record() for ln in self.lines],
            "whoAmI": self.seller,
        }


def _parse_line(rec: Any, where: str) -> ItemLine:
    if not isinstance(rec, Mapping):
        raise ParseError(f"{where}: expected an object", field=where)
    for name, typ in _LINE_FIELDS.items():
        value = rec.get(name)
        if value is None:
            raise ParseError(f"{where}: missing {name!r}", field=f"{where}.{name}")
        if not isinstance(value, typ) or isinstance(value, bool):
            raise ParseError(f"{where}.{name}: expected {typ.__name__}, got {value!r}", field=f"{where}.{name}")
    return ItemLine.from_record(rec)


def _parse_document(rec: Any, where: str) -> ShoppingListDocument:
    if not isinstance(rec, Mapping):
        raise ParseError(f"{where}: expected an object", field=where)
    for name in ("buyer", "whoAmI"):
        if not isinstance(rec.get(name), str):
            raise ParseError(f"{where}: missing or non-string {name!r}", field=f"{where}.{name}")
    items = rec.get("shoppingList")
    if not isinstance(items, list) or not items:
        raise ParseError(f"{where}: shoppingList must be a non-empty array", field=f"{where}.shoppingList")
    amount = rec.get("amount")
    if amount is not None and (not isinstance(amount, int) or isinstance(amount, bool)):
        raise ParseError(f"{where}.amount: expected int", field=f"{where}.amount")
    lines = tuple(_parse_line(item, f"{where}.shoppingList[{i}]") for i, item in enumerate(items))
    return ShoppingListDocument(buyer=rec["buyer"], seller=rec["whoAmI"], lines=lines, amount=amount)


def parse_shopping_lists(
    text: str,
    vat_rates: Mapping[str, int] = contracts.VAT_RATES,
    strict: bool = False,
) -> list[ShoppingListDocument]:
    """Parse a JSON array (or single object) of shopping-list documents.

    Each line's ``vatRate`` is checked against ``vat_rates``. A mismatch
    raises :class:`RateMismatch` when ``strict``; otherwise it is logged and
    the line takes the table rate.
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as err:
        raise ParseError(f"malformed JSON: {err.msg}", line=err.lineno) from None
    if isinstance(data, Mapping):
        data = [data]
    if not isinstance(data, list):
        raise ParseError("expected an array of shopping lists")
    docs = []
    for i, rec in enumerate(data):
        doc = _parse_document(rec, f"[{i}]")
        fixed = []
        for line in doc.lines:
            try:
                contracts.check_rate(line, vat_rates)
            except RateMismatch as err:
                if strict or line.item not in vat_rates:
                    raise
                log.warning("%s; using the table rate", err.detail or err)
                line = replace(line, vat_rate=vat_rates[line.item])
            fixed.append(line)
        docs.append(replace(doc, lines=tuple(fixed)))
    return docs


def parse_shopping_list_json(
    path: str | Path,
    vat_rates: Mapping[str, int] = contracts.VAT_RATES,
    strict: bool = False,
) -> list[ShoppingListDocument]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as err:
        raise ParseError(f"{path}: {err.strerror}") from None
    try:
        return parse_shopping_lists(text, vat_rates, strict)
    except ParseError as err:
        raise ParseError(f"{path}: {err.message}", line=err.line, field=err.field) from None


def data_path(name: str) -> Path:
    return Path(str(resources.files("smartmoney") / "data" / name))


def listing(n: int) -> ShoppingListDocument:
    """The bundled example shopping list ``n`` (1 or 2)."""
    if n not in (1, 2):
        raise ValueError("bundled listings are 1 and 2")
    return parse_shopping_list_json(data_path(f"shopping_list_{n}.json"), strict=True)[0]
