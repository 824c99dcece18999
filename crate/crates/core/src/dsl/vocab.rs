use serde::{Deserialize, Serialize};

use super::DslError;

/// One of the three feature dimensions an object varies along.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dim {
    Size,
    Color,
    Shape,
}

impl Dim {
    pub const ALL: [Dim; 3] = [Dim::Size, Dim::Color, Dim::Shape];

    pub fn keyword(self) -> &'static str {
        match self {
            Dim::Size => "is-size",
            Dim::Color => "is-color",
            Dim::Shape => "is-shape",
        }
    }
}

/// Feature value names. Sizes are ordered smallest first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureVocab {
    pub sizes: Vec<String>,
    pub colors: Vec<String>,
    pub shapes: Vec<String>,
}

impl Default for FeatureVocab {
    fn default() -> Self {
        Self::example()
    }
}

fn owned(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

impl FeatureVocab {
    pub fn new(sizes: Vec<String>, colors: Vec<String>, shapes: Vec<String>) -> Result<Self, DslError> {
        let vocab = FeatureVocab { sizes, colors, shapes };
        vocab.validate()?;
        Ok(vocab)
    }

    /// Vocabulary used by the worked examples (yellow, rectangle).
    pub fn example() -> Self {
        FeatureVocab {
            sizes: owned(&["small", "medium", "large"]),
            colors: owned(&["blue", "green", "yellow"]),
            shapes: owned(&["circle", "rectangle", "triangle"]),
        }
    }

    /// Vocabulary named in the task description (red, square).
    pub fn prose() -> Self {
        FeatureVocab {
            sizes: owned(&["small", "medium", "large"]),
            colors: owned(&["blue", "green", "red"]),
            shapes: owned(&["circle", "triangle", "square"]),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, DslError> {
        let vocab: FeatureVocab =
            serde_json::from_str(text).map_err(|e| DslError::Vocab(e.to_string()))?;
        vocab.validate()?;
        Ok(vocab)
    }

    pub fn validate(&self) -> Result<(), DslError> {
        for dim in Dim::ALL {
            let names = self.values(dim);
            if names.is_empty() {
                return Err(DslError::Vocab(format!("{dim:?} list is empty")));
            }
            for (i, name) in names.iter().enumerate() {
                if names[..i].contains(name) {
                    return Err(DslError::Vocab(format!("duplicate {dim:?} value `{name}`")));
                }
                if name.is_empty() || name.chars().any(|c| c.is_whitespace() || c == '(' || c == ')') {
                    return Err(DslError::Vocab(format!("invalid feature name `{name}`")));
                }
            }
        }
        Ok(())
    }

    pub fn values(&self, dim: Dim) -> &[String] {
        match dim {
            Dim::Size => &self.sizes,
            Dim::Color => &self.colors,
            Dim::Shape => &self.shapes,
        }
    }

    pub fn lookup(&self, dim: Dim, name: &str) -> Option<usize> {
        self.values(dim).iter().position(|v| v == name)
    }

    /// Finds which dimension a bare feature name belongs to.
    pub fn classify(&self, name: &str) -> Option<(Dim, usize)> {
        Dim::ALL
            .into_iter()
            .find_map(|dim| self.lookup(dim, name).map(|i| (dim, i)))
    }

    pub fn universe_size(&self) -> usize {
        self.sizes.len() * self.colors.len() * self.shapes.len()
    }

    /// Every distinct object, ordered by (size, color, shape).
    pub fn universe(&self) -> Vec<Obj> {
        let mut out = Vec::with_capacity(self.universe_size());
        for size in 0..self.sizes.len() {
            for color in 0..self.colors.len() {
                for shape in 0..self.shapes.len() {
                    out.push(Obj::new(size as u8, color as u8, shape as u8));
                }
            }
        }
        out
    }

    /// Text form such as `medium blue rectangle`.
    pub fn describe(&self, obj: Obj) -> String {
        format!(
            "{} {} {}",
            self.sizes[obj.size as usize], self.colors[obj.color as usize], self.shapes[obj.shape as usize]
        )
    }

    /// Inverse of [`FeatureVocab::describe`]; tolerant of case and extra whitespace.
    pub fn parse_object(&self, text: &str) -> Option<Obj> {
        let words: Vec<String> = text.split_whitespace().map(|w| w.to_lowercase()).collect();
        if words.len() != 3 {
            return None;
        }
        let find = |dim: Dim, w: &str| self.values(dim).iter().position(|v| v.eq_ignore_ascii_case(w));
        Some(Obj::new(
            find(Dim::Size, &words[0])? as u8,
            find(Dim::Color, &words[1])? as u8,
            find(Dim::Shape, &words[2])? as u8,
        ))
    }

    pub fn contains(&self, obj: Obj) -> bool {
        (obj.size as usize) < self.sizes.len()
            && (obj.color as usize) < self.colors.len()
            && (obj.shape as usize) < self.shapes.len()
    }
}

/// An object as feature indices into a [`FeatureVocab`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Obj {
    pub size: u8,
    pub color: u8,
    pub shape: u8,
}

impl Obj {
    pub const fn new(size: u8, color: u8, shape: u8) -> Self {
        Obj { size, color, shape }
    }

    pub fn feature(self, dim: Dim) -> u8 {
        match dim {
            Dim::Size => self.size,
            Dim::Color => self.color,
            Dim::Shape => self.shape,
        }
    }
}

pub const MAX_SET_SIZE: usize = 5;

/// One displayed set with the object currently being classified.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Context {
    objects: Vec<Obj>,
    target: usize,
}

impl Context {
    pub fn new(objects: Vec<Obj>, target: usize) -> Result<Self, DslError> {
        if objects.is_empty() || objects.len() > MAX_SET_SIZE {
            return Err(DslError::Context(format!(
                "a set holds 1..={MAX_SET_SIZE} objects, got {}",
                objects.len()
            )));
        }
        if target >= objects.len() {
            return Err(DslError::Context(format!(
                "target {target} out of range for {} objects",
                objects.len()
            )));
        }
        Ok(Context { objects, target })
    }

    /// Builds a context without the 5-object cap; used by the evaluator tests
    /// and equivalence checks over larger universes.
    pub(crate) fn unchecked(objects: Vec<Obj>, target: usize) -> Self {
        debug_assert!(target < objects.len());
        Context { objects, target }
    }

    pub fn objects(&self) -> &[Obj] {
        &self.objects
    }

    pub fn target(&self) -> usize {
        self.target
    }

    pub fn target_object(&self) -> Obj {
        self.objects[self.target]
    }

    pub fn with_target(&self, target: usize) -> Result<Self, DslError> {
        Context::new(self.objects.clone(), target)
    }

    pub fn fits(&self, vocab: &FeatureVocab) -> bool {
        self.objects.iter().all(|o| vocab.contains(*o))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_duplicates_and_empty_lists() {
        let bad = FeatureVocab::new(vec![], vec!["blue".into()], vec!["circle".into()]);
        assert!(bad.is_err());
        let dup = FeatureVocab::new(
            vec!["small".into()],
            vec!["blue".into(), "blue".into()],
            vec!["circle".into()],
        );
        assert!(dup.is_err());
    }

    #[test]
    fn vocab_json_roundtrip() {
        let json = r#"{"sizes":["small","medium","large"],"colors":["blue","green","red"],"shapes":["circle","triangle","square"]}"#;
        let v = FeatureVocab::from_json(json).unwrap();
        assert_eq!(v, FeatureVocab::prose());
        assert!(FeatureVocab::from_json(r#"{"sizes":[],"colors":["a"],"shapes":["b"]}"#).is_err());
    }

    #[test]
    fn describes_and_parses_objects() {
        let v = FeatureVocab::example();
        let o = Obj::new(1, 0, 1);
        assert_eq!(v.describe(o), "medium blue rectangle");
        assert_eq!(v.parse_object("  Medium BLUE   rectangle "), Some(o));
        assert_eq!(v.parse_object("medium blue"), None);
        assert_eq!(v.universe().len(), 27);
    }

    #[test]
    fn context_bounds() {
        let o = Obj::new(0, 0, 0);
        assert!(Context::new(vec![], 0).is_err());
        assert!(Context::new(vec![o; 6], 0).is_err());
        assert!(Context::new(vec![o; 2], 2).is_err());
        assert!(Context::new(vec![o; 5], 4).is_ok());
    }
}
