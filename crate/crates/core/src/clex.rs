//! Line-level C lexing shared by the structural rules and the code channel.

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Splits one line of C into identifier/number tokens, operators and
/// punctuation. Comments are dropped and string/char literals become a single
/// token.
pub fn c_tokens(line: &str) -> Vec<String> {
    const OPS3: [&str; 3] = ["<<=", ">>=", "..."];
    const OPS2: [&str; 19] = [
        "==", "!=", "<=", ">=", "->", "&&", "||", "++", "--", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<",
        ">>",
    ];
    let chars: Vec<char> = line.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if is_word_char(c) {
            let start = i;
            while i < chars.len() && is_word_char(chars[i]) {
                i += 1;
            }
            out.push(chars[start..i].iter().collect());
        } else if c == '/' && chars.get(i + 1) == Some(&'/') {
            break;
        } else if c == '/' && chars.get(i + 1) == Some(&'*') {
            i += 2;
            while i < chars.len() && !(chars[i] == '*' && chars.get(i + 1) == Some(&'/')) {
                i += 1;
            }
            i += 2;
        } else if c == '"' || c == '\'' {
            let start = i;
            i += 1;
            while i < chars.len() && chars[i] != c {
                if chars[i] == '\\' {
                    i += 1;
                }
                i += 1;
            }
            i = (i + 1).min(chars.len());
            out.push(chars[start..i].iter().collect());
        } else {
            let rest: String = chars[i..chars.len().min(i + 3)].iter().collect();
            let op = OPS3
                .iter()
                .chain(OPS2.iter())
                .find(|op| rest.starts_with(**op))
                .map_or_else(|| c.to_string(), |op| op.to_string());
            i += op.chars().count();
            out.push(op);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenizer() {
        assert_eq!(
            c_tokens(r#"if (p == NULL) { puts("p = 1"); } // p = 2"#),
            vec!["if", "(", "p", "==", "NULL", ")", "{", "puts", "(", "\"p = 1\"", ")", ";", "}"]
        );
        assert_eq!(c_tokens("a->b >>= 2; /* x = 1 */ c"), vec!["a", "->", "b", ">>=", "2", ";", "c"]);
        assert_eq!(c_tokens("'\\''"), vec!["'\\''"]);
    }
}
