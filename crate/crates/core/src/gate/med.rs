/// Word-level Levenshtein distance with unit insert, delete and substitute costs.
pub fn word_edit_distance<A, B>(a: &[A], b: &[B]) -> usize
where
    A: AsRef<str>,
    B: AsRef<str>,
{
    if a.is_empty() {
        return b.len();
    }
    // single rolling row over b
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, wa) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, wb) in b.iter().enumerate() {
            let cost = usize::from(wa.as_ref() != wb.as_ref());
            let next = (diag + cost).min(row[j] + 1).min(row[j + 1] + 1);
            diag = row[j + 1];
            row[j + 1] = next;
        }
    }
    row[b.len()]
}
