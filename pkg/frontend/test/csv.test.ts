import assert from "node:assert/strict";
import { test } from "node:test";

import { MissingColumnError, assertMonotoneTime, column, columnIndices, parseCsv } from "../src/csv.js";

test("parseCsv reads header and float rows", () => {
  const t = parseCsv("a,b,c\n1,2,3\n4,5,6\n");
  assert.deepEqual(t.columns, ["a", "b", "c"]);
  assert.deepEqual(t.rows, [
    [1, 2, 3],
    [4, 5, 6],
  ]);
});

test("parseCsv rejects ragged rows and empty input", () => {
  assert.throws(() => parseCsv("a,b\n1\n"), /row 1 has 1 fields/);
  assert.throws(() => parseCsv(""), /empty CSV/);
});

test("columnIndices names every missing column", () => {
  const t = parseCsv("t,x\n0,1\n");
  try {
    columnIndices(t, ["t", "y", "z"], "f.csv");
    assert.fail("expected throw");
  } catch (e) {
    assert.ok(e instanceof MissingColumnError);
    assert.deepEqual(e.missing, ["y", "z"]);
    assert.match(e.message, /y, z/);
    assert.match(e.message, /f\.csv/);
  }
});

test("column extraction", () => {
  const t = parseCsv("t,x\n0,5\n1,7\n");
  assert.deepEqual(column(t, "x"), [5, 7]);
});

test("monotone time check", () => {
  assert.doesNotThrow(() => assertMonotoneTime(parseCsv("t,x\n0,0\n1,0\n2,0\n")));
  assert.throws(() => assertMonotoneTime(parseCsv("t,x\n0,0\n2,0\n1,0\n")), /not strictly increasing/);
});
