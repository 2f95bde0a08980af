// Sheet-to-CSV conversion for uploads. The service ingests delimited text
// only, so workbooks are flattened in the browser before the POST.

import * as XLSX from "xlsx";

/** First worksheet of the workbook as CSV text. */
export function xlsxToCsv(buf: ArrayBuffer): string {
  const book = XLSX.read(buf, { type: "array" });
  const first = book.SheetNames[0];
  if (!first) throw new Error("workbook has no sheets");
  return XLSX.utils.sheet_to_csv(book.Sheets[first]);
}
