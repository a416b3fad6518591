//! Templated biography corpus for desk-scale experiments.
//!
//! Each instance draws random field values and renders them through one of
//! four templates. The set of table keys identifies the template, so the
//! surface form is a deterministic function of the table.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Stopwords, TableInstance};

pub const TEMPLATE_COUNT: usize = 4;

const FIRST_NAMES: &[&str] = &[
    "thaila", "sean", "dave", "maria", "jonas", "elena", "victor", "ingrid", "rahul", "keiko", "omar", "lucia", "pavel",
    "amara", "felix", "noor", "tomas", "greta", "milan", "sofia",
];
const LAST_NAMES: &[&str] = &[
    "ayala", "macias", "green", "lindqvist", "okafor", "moreau", "castell", "novak", "haddad", "brennan", "ferreira",
    "kowalski", "tanaka", "osei", "duarte", "varga", "holm", "quinn", "ibarra", "petrov",
];
const MONTHS: &[&str] = &[
    "january", "february", "march", "april", "may", "june", "july", "august", "september", "october", "november",
    "december",
];
const PLACES: &[&str] = &[
    "mason city iowa",
    "lyon france",
    "porto portugal",
    "osaka japan",
    "accra ghana",
    "krakow poland",
    "cork ireland",
    "tucson arizona",
    "bergen norway",
    "pune india",
    "salt lake city utah",
    "rio de janeiro",
];
const NATIONALITIES: &[&str] = &[
    "american", "french", "portuguese", "japanese", "ghanaian", "polish", "irish", "norwegian", "indian", "italian",
];
const OCCUPATIONS: &[&str] = &[
    "lawyer", "actress", "painter", "architect", "journalist", "engineer", "novelist", "chef", "photographer",
    "economist",
];
const KNOWN_FOR: &[&str] = &["litigation", "sculpture", "poetry", "television", "photography", "cooking", "bridges"];

/// Generation options.
#[derive(Clone, Debug, Default)]
pub struct SynthOptions {
    /// Adds `article_title` and `residence` records duplicating the name and
    /// birth place values.
    pub duplicate_distractors: bool,
    /// Restricts the templates drawn from; empty means all four.
    pub templates: Vec<usize>,
}

/// A generated instance together with the template that rendered it.
#[derive(Clone, Debug)]
pub struct SyntheticInstance {
    pub template: usize,
    pub instance: TableInstance,
}

struct Person {
    first: &'static str,
    last: &'static str,
    day: String,
    month: &'static str,
    year: String,
    place: &'static str,
    nationality: &'static str,
    occupation: &'static str,
    known_for: &'static str,
    active: String,
}

fn article(word: &str) -> &'static str {
    if word.starts_with(['a', 'e', 'i', 'o', 'u']) {
        "an"
    } else {
        "a"
    }
}

impl Person {
    fn draw(rng: &mut ChaCha8Rng) -> Self {
        let year: u32 = rng.random_range(1940..2000);
        Self {
            first: FIRST_NAMES.choose(rng).unwrap(),
            last: LAST_NAMES.choose(rng).unwrap(),
            day: rng.random_range(1..29u32).to_string(),
            month: MONTHS.choose(rng).unwrap(),
            year: year.to_string(),
            place: PLACES.choose(rng).unwrap(),
            nationality: NATIONALITIES.choose(rng).unwrap(),
            occupation: OCCUPATIONS.choose(rng).unwrap(),
            known_for: KNOWN_FOR.choose(rng).unwrap(),
            active: (year + rng.random_range(18..31)).to_string(),
        }
    }

    fn name(&self) -> String {
        format!("{} {}", self.first, self.last)
    }

    fn birth_date(&self) -> String {
        format!("{} {} {}", self.day, self.month, self.year)
    }

    fn render(&self, template: usize) -> (Vec<(&'static str, String)>, String) {
        let name = self.name();
        let (nat, occ) = (self.nationality, self.occupation);
        match template {
            0 => (
                vec![("name", name.clone()), ("nationality", nat.into()), ("occupation", occ.into())],
                format!("{name} is {} {nat} {occ} .", article(nat)),
            ),
            1 => (
                vec![
                    ("name", name.clone()),
                    ("birth_date", self.birth_date()),
                    ("nationality", nat.into()),
                    ("occupation", occ.into()),
                ],
                format!(
                    "{name} -lrb- born {} {} , {} -rrb- is {} {nat} {occ} .",
                    self.month,
                    self.day,
                    self.year,
                    article(nat)
                ),
            ),
            2 => (
                vec![
                    ("name", name.clone()),
                    ("birth_date", self.birth_date()),
                    ("birth_place", self.place.into()),
                    ("occupation", occ.into()),
                ],
                format!(
                    "{name} -lrb- born {} in {} -rrb- was {} {occ} .",
                    self.birth_date(),
                    self.place,
                    article(occ)
                ),
            ),
            _ => (
                vec![
                    ("name", name.clone()),
                    ("birth_date", self.birth_date()),
                    ("birth_place", self.place.into()),
                    ("nationality", nat.into()),
                    ("occupation", occ.into()),
                    ("known_for", self.known_for.into()),
                    ("years_active", self.active.clone()),
                ],
                format!(
                    "{name} -lrb- born {month} {day} , {year} in {place} -rrb- is {a_nat} {nat} {occ} . \
                     {last} began working as {a_occ} {occ} in {active} and is best known for {known} . \
                     before that , {last} studied in {place} for several years . \
                     the work of {last} has been shown in many countries .",
                    month = self.month,
                    day = self.day,
                    year = self.year,
                    place = self.place,
                    a_nat = article(nat),
                    a_occ = article(occ),
                    last = self.last,
                    active = self.active,
                    known = self.known_for,
                ),
            ),
        }
    }
}

/// Generates `n` instances with the default options.
pub fn generate_synthetic_corpus(seed: u64, n: usize) -> Vec<TableInstance> {
    generate_synthetic(seed, n, &SynthOptions::default())
        .into_iter()
        .map(|s| s.instance)
        .collect()
}

/// Generates `n` instances; deterministic in `seed` and `options`.
pub fn generate_synthetic(seed: u64, n: usize, options: &SynthOptions) -> Vec<SyntheticInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let stopwords = Stopwords::english();
    let allowed: Vec<usize> = if options.templates.is_empty() {
        (0..TEMPLATE_COUNT).collect()
    } else {
        options.templates.clone()
    };
    (0..n)
        .map(|_| {
            let template = *allowed.choose(&mut rng).unwrap();
            let person = Person::draw(&mut rng);
            let (mut pairs, description) = person.render(template);
            if options.duplicate_distractors {
                if let Some(pos) = pairs.iter().position(|(k, _)| *k == "birth_place") {
                    pairs.insert(pos + 1, ("residence", person.place.into()));
                }
                pairs.push(("article_title", person.name()));
            }
            let instance = TableInstance::annotated(&pairs, &description, &stopwords)
                .expect("templates always produce nonempty tables");
            SyntheticInstance { template, instance }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_in_seed() {
        assert_eq!(generate_synthetic_corpus(1, 2), generate_synthetic_corpus(1, 2));
        assert_ne!(generate_synthetic_corpus(1, 4), generate_synthetic_corpus(2, 4));
    }

    #[test]
    fn descriptions_mention_every_field_token() {
        let stop = Stopwords::english();
        for s in generate_synthetic(3, 200, &SynthOptions::default()) {
            let inst = &s.instance;
            assert!(!inst.plan_tokens.is_empty());
            inst.validate().unwrap();
            for r in &inst.records {
                assert!(!stop.contains(&r.value_token), "{} is a stopword", r.value_token);
                assert!(inst.description.contains(&r.value_token), "{} not rendered", r.value_token);
            }
        }
    }

    #[test]
    fn templates_are_near_uniform() {
        let corpus = generate_synthetic(1, 1000, &SynthOptions::default());
        let mut counts = [0usize; TEMPLATE_COUNT];
        for s in &corpus {
            counts[s.template] += 1;
        }
        for c in counts {
            let share = c as f64 / 1000.0;
            assert!((share - 0.25).abs() <= 0.05, "template share {share}");
        }
    }

    #[test]
    fn template_lengths_span_short_and_long() {
        let corpus = generate_synthetic(5, 100, &SynthOptions::default());
        for s in &corpus {
            let len = s.instance.description.len();
            match s.template {
                0 => assert!((7..=9).contains(&len), "{len}"),
                3 => assert!((45..=60).contains(&len), "{len}"),
                _ => assert!((12..=22).contains(&len), "{len}"),
            }
        }
    }

    #[test]
    fn distractors_duplicate_values() {
        let opts = SynthOptions {
            duplicate_distractors: true,
            ..Default::default()
        };
        for s in generate_synthetic(9, 50, &opts) {
            let inst = &s.instance;
            if s.template == 3 {
                // repeated mentions legitimately move on to the unused copies
                continue;
            }
            let titles: Vec<_> = inst.records.iter().filter(|r| r.key_token == "article_title").collect();
            assert_eq!(titles.len(), 2);
            // single mentions resolve to the first occurrence, never the title copy
            for &p in &inst.plan_pointers {
                assert_ne!(inst.records[p].key_token, "article_title");
            }
        }
    }
}
