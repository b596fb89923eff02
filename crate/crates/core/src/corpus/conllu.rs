use std::io::{self, BufRead};

/// Sentences longer than this are dropped during ingestion.
pub const MAX_SENTENCE_TOKENS: usize = 32;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub form: String,
    pub lemma: String,
    pub pos: String,
    /// 1-based head position, 0 for the root.
    pub head: usize,
    pub deprel: String,
}

impl Token {
    pub fn new(form: &str, lemma: &str, pos: &str, head: usize, deprel: &str) -> Self {
        Token {
            form: form.to_string(),
            lemma: lemma.to_string(),
            pos: pos.to_string(),
            head,
            deprel: deprel.to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParsedSentence {
    tokens: Vec<Token>,
}

impl ParsedSentence {
    /// Checks that the heads form a single tree: exactly one root, heads in
    /// range, no cycles.
    pub fn new(tokens: Vec<Token>) -> Result<Self, String> {
        let n = tokens.len();
        if n == 0 {
            return Err("empty sentence".into());
        }
        let roots = tokens.iter().filter(|t| t.head == 0).count();
        if roots != 1 {
            return Err(format!("expected exactly one root, found {roots}"));
        }
        if let Some((i, t)) = tokens.iter().enumerate().find(|(i, t)| t.head > n || t.head == i + 1) {
            return Err(format!("token {} has invalid head {}", i + 1, t.head));
        }
        let s = ParsedSentence { tokens };
        for start in 0..n {
            let mut cur = start;
            let mut steps = 0;
            while let Some(p) = s.parent(cur) {
                cur = p;
                steps += 1;
                if steps > n {
                    return Err(format!("cycle through token {}", start + 1));
                }
            }
        }
        Ok(s)
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// 0-based index of the head of token `i`, `None` for the root.
    pub fn parent(&self, i: usize) -> Option<usize> {
        match self.tokens[i].head {
            0 => None,
            h => Some(h - 1),
        }
    }

    /// 0-based indices of the dependents of `i`, in linear order.
    pub fn children(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.tokens
            .iter()
            .enumerate()
            .filter(move |(_, t)| t.head == i + 1)
            .map(|(k, _)| k)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CorpusStats {
    pub sentences: usize,
    pub dropped_long: usize,
    pub malformed: usize,
}

/// Streams [`ParsedSentence`]s out of 10-column CoNLL-U.
///
/// Multiword-token ranges (`3-4`) and empty nodes (`5.1`) are skipped.
/// Malformed blocks are skipped and counted, as are sentences longer than
/// `max_tokens`.
pub struct ConlluReader<R> {
    lines: io::Lines<R>,
    line_no: usize,
    max_tokens: usize,
    stats: CorpusStats,
    done: bool,
}

impl<R: BufRead> ConlluReader<R> {
    pub fn new(reader: R) -> Self {
        Self::with_max_tokens(reader, MAX_SENTENCE_TOKENS)
    }

    pub fn with_max_tokens(reader: R, max_tokens: usize) -> Self {
        ConlluReader {
            lines: reader.lines(),
            line_no: 0,
            max_tokens,
            stats: CorpusStats::default(),
            done: false,
        }
    }

    pub fn stats(&self) -> CorpusStats {
        self.stats
    }

    /// Reads raw lines up to the next blank line. `None` at end of input.
    fn next_block(&mut self) -> Option<io::Result<Vec<(usize, String)>>> {
        let mut block = Vec::new();
        loop {
            match self.lines.next() {
                None => {
                    self.done = true;
                    return if block.is_empty() { None } else { Some(Ok(block)) };
                }
                Some(Err(e)) => return Some(Err(e)),
                Some(Ok(line)) => {
                    self.line_no += 1;
                    let line = line.trim_end_matches('\r').to_string();
                    if line.trim().is_empty() {
                        if !block.is_empty() {
                            return Some(Ok(block));
                        }
                    } else if !line.starts_with('#') {
                        block.push((self.line_no, line));
                    }
                }
            }
        }
    }
}

fn parse_block(block: &[(usize, String)]) -> Result<Vec<Token>, String> {
    let mut tokens = Vec::with_capacity(block.len());
    for (line_no, line) in block {
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            return Err(format!("line {line_no}: expected 10 columns, found {}", cols.len()));
        }
        if cols[0].contains(['-', '.']) {
            continue;
        }
        let id: usize = cols[0]
            .parse()
            .map_err(|_| format!("line {line_no}: bad token id `{}`", cols[0]))?;
        if id != tokens.len() + 1 {
            return Err(format!("line {line_no}: token id {id} out of sequence"));
        }
        let head: usize = cols[6]
            .parse()
            .map_err(|_| format!("line {line_no}: non-integer head `{}`", cols[6]))?;
        let lemma = if cols[2] == "_" { cols[1] } else { cols[2] };
        tokens.push(Token::new(cols[1], lemma, cols[3], head, cols[7]));
    }
    Ok(tokens)
}

impl<R: BufRead> Iterator for ConlluReader<R> {
    type Item = io::Result<ParsedSentence>;

    fn next(&mut self) -> Option<Self::Item> {
        while !self.done {
            let block = match self.next_block()? {
                Ok(b) => b,
                Err(e) => return Some(Err(e)),
            };
            match parse_block(&block).and_then(ParsedSentence::new) {
                Err(reason) => {
                    log::warn!("skipping malformed CoNLL-U block: {reason}");
                    self.stats.malformed += 1;
                }
                Ok(s) if s.len() > self.max_tokens => self.stats.dropped_long += 1,
                Ok(s) => {
                    self.stats.sentences += 1;
                    return Some(Ok(s));
                }
            }
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const CUP_OF_COFFEE: &str = "\
# text = cup of coffee
1\tcup\tcup\tNOUN\tNN\t_\t0\troot\t_\t_
2\tof\tof\tADP\tIN\t_\t1\tprep\t_\t_
3\tcoffee\tcoffee\tNOUN\tNN\t_\t2\tpobj\t_\t_
";

    fn long_sentence(n: usize) -> String {
        let mut s = String::new();
        for i in 1..=n {
            let head = if i == 1 { 0 } else { 1 };
            s.push_str(&format!("{i}\tw{i}\tw{i}\tNOUN\tNN\t_\t{head}\tdep\t_\t_\n"));
        }
        s
    }

    #[test]
    fn reads_one_sentence() {
        let mut r = ConlluReader::new(CUP_OF_COFFEE.as_bytes());
        let s = r.next().unwrap().unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.parent(2), Some(1));
        assert_eq!(s.parent(0), None);
        assert_eq!(s.children(0).collect::<Vec<_>>(), vec![1]);
        assert!(r.next().is_none());
        assert_eq!(r.stats().sentences, 1);
    }

    #[test]
    fn drops_long_sentences() {
        let text = format!("{}\n{}", long_sentence(40), CUP_OF_COFFEE);
        let mut r = ConlluReader::new(text.as_bytes());
        let all: Vec<_> = r.by_ref().map(Result::unwrap).collect();
        assert_eq!(all.len(), 1);
        assert_eq!(r.stats().dropped_long, 1);
        // exactly 32 is kept
        let text = long_sentence(32);
        assert_eq!(ConlluReader::new(text.as_bytes()).count(), 1);
    }

    #[test]
    fn skips_malformed_block() {
        let bad = "1\tcup\tcup\tNOUN\tNN\t_\tX\troot\t_\t_\n";
        let text = format!("{CUP_OF_COFFEE}\n{bad}\n{CUP_OF_COFFEE}");
        let mut r = ConlluReader::new(text.as_bytes());
        assert_eq!(r.by_ref().count(), 2);
        assert_eq!(r.stats().malformed, 1);
    }

    #[test]
    fn skips_multiword_ranges_and_empty_nodes() {
        let text = "\
1-2\tdon't\t_\t_\t_\t_\t_\t_\t_\t_
1\tdo\tdo\tAUX\t_\t_\t3\taux\t_\t_
2\tn't\tnot\tPART\t_\t_\t3\tneg\t_\t_
3\tgo\tgo\tVERB\t_\t_\t0\troot\t_\t_
3.1\tgo\tgo\tVERB\t_\t_\t_\t_\t_\t_
";
        let s: Vec<_> = ConlluReader::new(text.as_bytes()).map(Result::unwrap).collect();
        assert_eq!(s[0].len(), 3);
    }

    #[test]
    fn rejects_invalid_trees() {
        let tok = |h| Token::new("a", "a", "X", h, "dep");
        assert!(ParsedSentence::new(vec![tok(0), tok(0)]).is_err());
        assert!(ParsedSentence::new(vec![tok(0), tok(3), tok(2)]).is_err());
        assert!(ParsedSentence::new(vec![tok(0), tok(5)]).is_err());
        assert!(ParsedSentence::new(vec![tok(0), tok(1), tok(2)]).is_ok());
    }
}
