//! Part-of-speech tagging over the Penn tag subset used by the formality score.
//!
//! [`RuleTagger`] is a small deterministic tagger: a closed-class lexicon, a handful of
//! common open-class words, suffix guessing for everything else, and a few contextual
//! rules for noun/verb ambiguity. It is not meant to compete with statistical taggers;
//! callers with a better tagger implement [`PosTagger`].

use std::collections::HashMap;
use std::sync::OnceLock;

pub trait PosTagger: Send + Sync {
    /// One Penn-style tag per input word.
    fn tag(&self, words: &[&str]) -> Vec<String>;
}

/// Words that introduce a new clause for the purpose of the "has this clause a verb yet" rule.
const CLAUSE_OPENERS: &[&str] = &["WDT", "WP", "WRB", "CC"];

const LEXICON: &[(&str, &[&str])] = &[
    // determiners and articles
    ("the", &["DT"]),
    ("a", &["DT"]),
    ("an", &["DT"]),
    ("this", &["DT"]),
    ("these", &["DT"]),
    ("those", &["DT"]),
    ("every", &["DT"]),
    ("each", &["DT"]),
    ("some", &["DT"]),
    ("any", &["DT"]),
    ("no", &["DT"]),
    ("all", &["DT"]),
    ("both", &["DT"]),
    ("another", &["DT"]),
    ("that", &["DT", "WDT", "IN"]),
    // prepositions and subordinators
    ("in", &["IN"]),
    ("on", &["IN"]),
    ("at", &["IN"]),
    ("of", &["IN"]),
    ("from", &["IN"]),
    ("with", &["IN"]),
    ("by", &["IN"]),
    ("for", &["IN"]),
    ("about", &["IN"]),
    ("into", &["IN"]),
    ("onto", &["IN"]),
    ("over", &["IN"]),
    ("under", &["IN"]),
    ("upon", &["IN"]),
    ("between", &["IN"]),
    ("through", &["IN"]),
    ("during", &["IN"]),
    ("without", &["IN"]),
    ("within", &["IN"]),
    ("across", &["IN"]),
    ("after", &["IN"]),
    ("before", &["IN"]),
    ("against", &["IN"]),
    ("among", &["IN"]),
    ("around", &["IN"]),
    ("behind", &["IN"]),
    ("below", &["IN"]),
    ("above", &["IN"]),
    ("near", &["IN"]),
    ("toward", &["IN"]),
    ("towards", &["IN"]),
    ("like", &["IN", "VBP"]),
    ("as", &["IN"]),
    ("than", &["IN"]),
    ("if", &["IN"]),
    ("because", &["IN"]),
    ("although", &["IN"]),
    ("though", &["IN"]),
    ("while", &["IN"]),
    ("since", &["IN"]),
    ("unless", &["IN"]),
    ("whether", &["IN"]),
    ("until", &["IN"]),
    ("to", &["TO"]),
    // coordinating conjunctions
    ("and", &["CC"]),
    ("or", &["CC"]),
    ("but", &["CC"]),
    ("nor", &["CC"]),
    ("yet", &["CC"]),
    ("so", &["RB"]),
    // pronouns
    ("i", &["PRP"]),
    ("you", &["PRP"]),
    ("he", &["PRP"]),
    ("she", &["PRP"]),
    ("it", &["PRP"]),
    ("we", &["PRP"]),
    ("they", &["PRP"]),
    ("me", &["PRP"]),
    ("him", &["PRP"]),
    ("her", &["PRP$"]),
    ("us", &["PRP"]),
    ("them", &["PRP"]),
    ("myself", &["PRP"]),
    ("yourself", &["PRP"]),
    ("itself", &["PRP"]),
    ("themselves", &["PRP"]),
    ("my", &["PRP$"]),
    ("your", &["PRP$"]),
    ("his", &["PRP$"]),
    ("its", &["PRP$"]),
    ("our", &["PRP$"]),
    ("their", &["PRP$"]),
    ("who", &["WP"]),
    ("whom", &["WP"]),
    ("what", &["WP"]),
    ("whose", &["WP$"]),
    ("which", &["WDT"]),
    ("where", &["WRB"]),
    ("when", &["WRB"]),
    ("why", &["WRB"]),
    ("how", &["WRB"]),
    ("there", &["EX"]),
    // modals and auxiliaries
    ("can", &["MD"]),
    ("could", &["MD"]),
    ("may", &["MD"]),
    ("might", &["MD"]),
    ("must", &["MD"]),
    ("shall", &["MD"]),
    ("should", &["MD"]),
    ("will", &["MD"]),
    ("would", &["MD"]),
    ("is", &["VBZ"]),
    ("are", &["VBP"]),
    ("was", &["VBD"]),
    ("were", &["VBD"]),
    ("be", &["VB"]),
    ("been", &["VBN"]),
    ("being", &["VBG"]),
    ("am", &["VBP"]),
    ("has", &["VBZ"]),
    ("have", &["VBP"]),
    ("had", &["VBD"]),
    ("do", &["VBP"]),
    ("does", &["VBZ"]),
    ("did", &["VBD"]),
    ("not", &["RB"]),
    ("n't", &["RB"]),
    // adverbs
    ("very", &["RB"]),
    ("too", &["RB"]),
    ("also", &["RB"]),
    ("even", &["RB"]),
    ("just", &["RB"]),
    ("only", &["RB"]),
    ("still", &["RB"]),
    ("always", &["RB"]),
    ("never", &["RB"]),
    ("often", &["RB"]),
    ("sometimes", &["RB"]),
    ("here", &["RB"]),
    ("now", &["RB"]),
    ("then", &["RB"]),
    ("again", &["RB"]),
    ("soon", &["RB"]),
    ("already", &["RB"]),
    ("almost", &["RB"]),
    ("quite", &["RB"]),
    ("rather", &["RB"]),
    ("most", &["RBS"]),
    ("more", &["RBR"]),
    ("less", &["RBR"]),
    ("least", &["RBS"]),
    ("well", &["RB"]),
    ("away", &["RB"]),
    ("together", &["RB"]),
    // interjections
    ("oh", &["UH"]),
    ("hey", &["UH"]),
    ("hi", &["UH"]),
    ("hello", &["UH"]),
    ("wow", &["UH"]),
    ("yes", &["UH"]),
    ("ouch", &["UH"]),
    ("please", &["UH"]),
    ("ok", &["UH"]),
    ("okay", &["UH"]),
    ("oops", &["UH"]),
    // adjectives
    ("big", &["JJ"]),
    ("small", &["JJ"]),
    ("good", &["JJ"]),
    ("bad", &["JJ"]),
    ("new", &["JJ"]),
    ("old", &["JJ"]),
    ("high", &["JJ"]),
    ("low", &["JJ"]),
    ("long", &["JJ"]),
    ("short", &["JJ"]),
    ("great", &["JJ"]),
    ("little", &["JJ"]),
    ("right", &["JJ"]),
    ("left", &["JJ"]),
    ("next", &["JJ"]),
    ("last", &["JJ"]),
    ("first", &["JJ"]),
    ("other", &["JJ"]),
    ("same", &["JJ"]),
    ("different", &["JJ"]),
    ("wooden", &["JJ"]),
    ("golden", &["JJ"]),
    ("young", &["JJ"]),
    ("early", &["JJ"]),
    ("late", &["JJ"]),
    ("hot", &["JJ"]),
    ("cold", &["JJ"]),
    ("red", &["JJ"]),
    ("blue", &["JJ"]),
    ("green", &["JJ"]),
    ("happy", &["JJ"]),
    ("sad", &["JJ"]),
    ("easy", &["JJ"]),
    ("hard", &["JJ"]),
    ("astute", &["JJ"]),
    ("true", &["JJ"]),
    ("free", &["JJ"]),
    ("full", &["JJ"]),
    ("whole", &["JJ"]),
    ("many", &["JJ"]),
    ("few", &["JJ"]),
    ("much", &["JJ"]),
    ("own", &["JJ"]),
    ("such", &["JJ"]),
    // common nouns that suffix rules would get wrong
    ("thing", &["NN"]),
    ("things", &["NNS"]),
    ("morning", &["NN"]),
    ("evening", &["NN"]),
    ("king", &["NN"]),
    ("ring", &["NN"]),
    ("spring", &["NN"]),
    ("string", &["NN"]),
    ("ceiling", &["NN"]),
    ("building", &["NN"]),
    ("meeting", &["NN"]),
    ("nothing", &["NN"]),
    ("something", &["NN"]),
    ("everything", &["NN"]),
    ("anything", &["NN"]),
    ("news", &["NN"]),
    ("physics", &["NN"]),
    ("mechanics", &["NNS"]),
    ("people", &["NNS"]),
    ("children", &["NNS"]),
    ("men", &["NNS"]),
    ("women", &["NNS"]),
    ("time", &["NN"]),
    ("year", &["NN"]),
    ("day", &["NN"]),
    ("way", &["NN"]),
    ("world", &["NN"]),
    ("life", &["NN"]),
    ("sun", &["NN"]),
    ("east", &["NN"]),
    ("west", &["NN"]),
    ("north", &["NN"]),
    ("south", &["NN"]),
    ("gold", &["NN"]),
    ("water", &["NN"]),
    ("book", &["NN"]),
    ("car", &["NN"]),
    ("dog", &["NN"]),
    ("apple", &["NN"]),
    ("chair", &["NN"]),
    ("love", &["NN", "VBP"]),
    ("justice", &["NN"]),
    ("courage", &["NN"]),
    ("wisdom", &["NN"]),
    ("century", &["NN"]),
    ("corner", &["NN"]),
    ("meter", &["NN"]),
    ("tea", &["NN"]),
    ("party", &["NN"]),
    ("ship", &["NN"]),
    // verbs
    ("go", &["VB"]),
    ("went", &["VBD"]),
    ("gone", &["VBN"]),
    ("make", &["VB"]),
    ("made", &["VBD"]),
    ("take", &["VB"]),
    ("took", &["VBD"]),
    ("taken", &["VBN"]),
    ("get", &["VB"]),
    ("got", &["VBD"]),
    ("see", &["VB"]),
    ("saw", &["VBD"]),
    ("seen", &["VBN"]),
    ("know", &["VB"]),
    ("knew", &["VBD"]),
    ("known", &["VBN"]),
    ("think", &["VB"]),
    ("thought", &["VBD"]),
    ("come", &["VB"]),
    ("came", &["VBD"]),
    ("give", &["VB"]),
    ("gave", &["VBD"]),
    ("given", &["VBN"]),
    ("tell", &["VB"]),
    ("told", &["VBD"]),
    ("say", &["VB"]),
    ("said", &["VBD"]),
    ("find", &["VB"]),
    ("found", &["VBD"]),
    ("explain", &["VB"]),
    ("describe", &["VB"]),
    ("write", &["VB"]),
    ("wrote", &["VBD"]),
    ("bark", &["VBP"]),
    ("continue", &["VBP"]),
    ("baffle", &["VB"]),
    ("stand", &["VBP"]),
    ("sleep", &["VBP"]),
];

fn lexicon() -> &'static HashMap<&'static str, &'static [&'static str]> {
    static LEX: OnceLock<HashMap<&'static str, &'static [&'static str]>> = OnceLock::new();
    LEX.get_or_init(|| LEXICON.iter().copied().collect())
}

fn is_noun(tag: &str) -> bool {
    tag.starts_with("NN")
}

fn is_verb(tag: &str) -> bool {
    tag.starts_with("VB") || tag == "MD"
}

fn guess_by_shape(word: &str, lower: &str, sentence_initial: bool) -> &'static str {
    if word.chars().all(|c| c.is_ascii_digit() || c == '.' || c == ',') {
        return "CD";
    }
    if word.chars().next().is_some_and(|c| c.is_ascii_digit()) {
        // ordinals such as 18th, 2nd
        if ["st", "nd", "rd", "th"].iter().any(|s| lower.ends_with(s)) {
            return "JJ";
        }
        return "CD";
    }
    if !sentence_initial && word.chars().next().is_some_and(char::is_uppercase) {
        return if lower.ends_with('s') { "NNPS" } else { "NNP" };
    }
    guess_by_suffix(lower)
}

fn guess_by_suffix(lower: &str) -> &'static str {
    const NOUN: &[&str] = &[
        "tion", "sion", "ment", "ness", "ity", "ism", "ance", "ence", "ship", "hood", "dom", "ist",
        "age", "ure",
    ];
    const ADJ: &[&str] = &[
        "ous", "ful", "ive", "able", "ible", "less", "ish", "ary", "ical", "ic", "al", "ent", "ant",
        "ian",
    ];
    if lower.ends_with("ly") && lower.len() > 4 {
        return "RB";
    }
    if lower.ends_with("ing") && lower.len() > 4 {
        return "VBG";
    }
    if lower.ends_with("ed") && lower.len() > 3 {
        return "VBN";
    }
    if lower.ends_with("est") && lower.len() > 5 {
        return "JJS";
    }
    if NOUN.iter().any(|s| lower.ends_with(s)) {
        return "NN";
    }
    if ADJ.iter().any(|s| lower.ends_with(s)) {
        return "JJ";
    }
    if lower.ends_with('s') && !(lower.ends_with("ss") || lower.ends_with("us") || lower.ends_with("is")) {
        return "NNS";
    }
    if lower.ends_with("ize") || lower.ends_with("ise") || lower.ends_with("ify") {
        return "VB";
    }
    "NN"
}

/// Deterministic lexicon, suffix and context rule tagger.
#[derive(Debug, Clone, Default)]
pub struct RuleTagger;

impl RuleTagger {
    pub fn new() -> Self {
        Self
    }
}

impl PosTagger for RuleTagger {
    fn tag(&self, words: &[&str]) -> Vec<String> {
        let lex = lexicon();
        let mut tags: Vec<&'static str> = Vec::with_capacity(words.len());
        // whether the current clause already has a finite verb
        let mut clause_has_verb = false;

        for (i, word) in words.iter().enumerate() {
            let lower = word.to_lowercase();
            let prev = if i > 0 { Some(tags[i - 1]) } else { None };
            let next_lower = words.get(i + 1).map(|w| w.to_lowercase());
            let next_entry = next_lower.as_deref().and_then(|w| lex.get(w));

            let tag: &'static str = match lex.get(lower.as_str()) {
                Some(options) if options.len() == 1 => options[0],
                Some(options) => {
                    if lower == "that" {
                        match prev {
                            Some(p) if is_noun(p) => "WDT",
                            Some(p) if is_verb(p) => "IN",
                            _ => {
                                let next_is_nominal = next_entry
                                    .map(|t| is_noun(t[0]) || t[0] == "JJ")
                                    .unwrap_or(false);
                                if next_is_nominal {
                                    "DT"
                                } else {
                                    "WDT"
                                }
                            }
                        }
                    } else {
                        // noun/verb ambiguity: determiners and adjectives select the noun
                        match prev {
                            Some("DT" | "PRP$" | "JJ" | "CD" | "POS") => {
                                *options.iter().find(|t| is_noun(t)).unwrap_or(&options[0])
                            }
                            Some("PRP" | "MD" | "TO" | "WP" | "WDT") => {
                                *options.iter().find(|t| is_verb(t)).unwrap_or(&options[0])
                            }
                            _ => options[0],
                        }
                    }
                }
                None => {
                    let guess = guess_by_shape(word, &lower, i == 0);
                    match guess {
                        // plural-looking word right after a noun or pronoun in a verbless
                        // clause is a third person verb ("the corner dates from")
                        "NNS" => match prev {
                            Some(p)
                                if (is_noun(p) || p == "PRP" || p == "WDT" || p == "WP")
                                    && !clause_has_verb =>
                            {
                                "VBZ"
                            }
                            _ => guess,
                        },
                        "VBN" => match prev {
                            Some(p) if (is_noun(p) || p == "PRP") && !clause_has_verb => "VBD",
                            _ => guess,
                        },
                        "NN" => match prev {
                            Some("MD" | "TO") => "VB",
                            _ => guess,
                        },
                        _ => guess,
                    }
                }
            };

            if CLAUSE_OPENERS.contains(&tag) {
                clause_has_verb = false;
            } else if is_verb(tag) && tag != "VBG" && tag != "VBN" {
                clause_has_verb = true;
            }
            tags.push(tag);
        }
        tags.into_iter().map(str::to_string).collect()
    }
}
