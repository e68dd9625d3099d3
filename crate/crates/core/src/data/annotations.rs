use std::collections::HashMap;
use std::io::BufRead;

use super::{ClassLabel, DataError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub xmin: f64,
    pub ymin: f64,
    pub xmax: f64,
    pub ymax: f64,
}

/// Center of a bounding box in pixels.
pub fn bbox_center(b: &BBox) -> (f64, f64) {
    ((b.xmin + b.xmax) / 2.0, (b.ymin + b.ymax) / 2.0)
}

/// One annotation line: `track xmin ymin xmax ymax frame lost occluded generated "label"`.
#[derive(Debug, Clone, PartialEq)]
pub struct RawAnnotation {
    pub track_id: u32,
    pub frame: i64,
    pub bbox: BBox,
    pub lost: bool,
    pub occluded: bool,
    pub generated: bool,
    pub label: ClassLabel,
}

/// Case-insensitive mapping from annotation label strings to classes.
#[derive(Debug, Clone)]
pub struct ClassVocab {
    map: HashMap<String, ClassLabel>,
}

impl Default for ClassVocab {
    fn default() -> Self {
        let mut map = HashMap::new();
        for c in ClassLabel::ALL {
            map.insert(c.name().to_string(), c);
            map.insert(c.dataset_label().to_lowercase(), c);
        }
        for (alias, c) in [
            ("bike", ClassLabel::Bicyclist),
            ("cyclist", ClassLabel::Bicyclist),
            ("skateboard", ClassLabel::Skateboarder),
            ("golfcart", ClassLabel::GolfCart),
            ("golf_cart", ClassLabel::GolfCart),
        ] {
            map.insert(alias.to_string(), c);
        }
        ClassVocab { map }
    }
}

impl ClassVocab {
    pub fn with_alias(mut self, alias: &str, class: ClassLabel) -> Self {
        self.map.insert(alias.trim().to_lowercase(), class);
        self
    }

    pub fn lookup(&self, label: &str) -> Option<ClassLabel> {
        self.map.get(&label.trim().to_lowercase()).copied()
    }
}

/// Parses annotation records, dropping those flagged lost.
pub fn parse_annotations(reader: impl BufRead, vocab: &ClassVocab) -> Result<Vec<RawAnnotation>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| DataError::Parse {
            line: lineno,
            msg: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let ann = parse_line(&line, lineno, vocab)?;
        if !ann.lost {
            out.push(ann);
        }
    }
    Ok(out)
}

fn parse_line(line: &str, lineno: usize, vocab: &ClassVocab) -> Result<RawAnnotation> {
    let err = |msg: String| DataError::Parse { line: lineno, msg };
    let mut rest = line.trim();
    let mut fields = Vec::with_capacity(9);
    for _ in 0..9 {
        let end = rest.find(char::is_whitespace).ok_or_else(|| {
            err(format!("expected 10 fields, found {}", fields.len() + 1))
        })?;
        fields.push(&rest[..end]);
        rest = rest[end..].trim_start();
    }
    let label = rest.trim().trim_matches('"');
    if label.is_empty() {
        return Err(err("missing label".into()));
    }
    let int = |idx: usize, name: &str| -> Result<i64> {
        fields[idx]
            .parse::<i64>()
            .map_err(|_| err(format!("{name}: not an integer: {:?}", fields[idx])))
    };
    let num = |idx: usize, name: &str| -> Result<f64> {
        let v = fields[idx]
            .parse::<f64>()
            .map_err(|_| err(format!("{name}: not a number: {:?}", fields[idx])))?;
        if !v.is_finite() {
            return Err(err(format!("{name}: not finite")));
        }
        Ok(v)
    };
    let flag = |idx: usize, name: &str| -> Result<bool> {
        match fields[idx] {
            "0" => Ok(false),
            "1" => Ok(true),
            other => Err(err(format!("{name}: expected 0 or 1, got {other:?}"))),
        }
    };
    let track_id = u32::try_from(int(0, "track_id")?)
        .map_err(|_| err("track_id: out of range".into()))?;
    let bbox = BBox {
        xmin: num(1, "xmin")?,
        ymin: num(2, "ymin")?,
        xmax: num(3, "xmax")?,
        ymax: num(4, "ymax")?,
    };
    if bbox.xmin > bbox.xmax || bbox.ymin > bbox.ymax {
        return Err(err(format!("inverted bounding box {bbox:?}")));
    }
    let label_class = vocab.lookup(label).ok_or_else(|| DataError::UnknownLabel {
        line: lineno,
        label: label.to_string(),
    })?;
    Ok(RawAnnotation {
        track_id,
        frame: int(5, "frame")?,
        bbox,
        lost: flag(6, "lost")?,
        occluded: flag(7, "occluded")?,
        generated: flag(8, "generated")?,
        label: label_class,
    })
}

/// Writes a record in the dataset's annotation layout.
pub fn serialize_annotation(a: &RawAnnotation) -> String {
    format!(
        "{} {} {} {} {} {} {} {} {} \"{}\"",
        a.track_id,
        a.bbox.xmin,
        a.bbox.ymin,
        a.bbox.xmax,
        a.bbox.ymax,
        a.frame,
        a.lost as u8,
        a.occluded as u8,
        a.generated as u8,
        a.label.dataset_label()
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse(s: &str) -> Result<Vec<RawAnnotation>> {
        parse_annotations(s.as_bytes(), &ClassVocab::default())
    }

    #[test]
    fn parses_sample_record() {
        let a = parse("3 10 20 30 40 0 0 0 0 \"Pedestrian\"").unwrap();
        assert_eq!(
            a,
            vec![RawAnnotation {
                track_id: 3,
                frame: 0,
                bbox: BBox {
                    xmin: 10.0,
                    ymin: 20.0,
                    xmax: 30.0,
                    ymax: 40.0
                },
                lost: false,
                occluded: false,
                generated: false,
                label: ClassLabel::Pedestrian,
            }]
        );
    }

    #[test]
    fn lost_records_are_dropped() {
        let a = parse("3 10 20 30 40 0 0 0 0 \"Pedestrian\"\n3 10 20 30 40 1 1 0 0 \"Pedestrian\"")
            .unwrap();
        assert_eq!(a.len(), 1);
    }

    #[test]
    fn occluded_records_are_kept() {
        let a = parse("3 10 20 30 40 1 0 1 1 \"Biker\"").unwrap();
        assert_eq!(a.len(), 1);
        assert_eq!(a[0].label, ClassLabel::Bicyclist);
    }

    #[test]
    fn empty_stream_is_empty() {
        assert!(parse("").unwrap().is_empty());
    }

    #[test]
    fn label_normalization() {
        let v = ClassVocab::default();
        assert_eq!(v.lookup("CART"), Some(ClassLabel::GolfCart));
        assert_eq!(v.lookup("Skater"), Some(ClassLabel::Skateboarder));
        assert_eq!(v.lookup("golf cart"), Some(ClassLabel::GolfCart));
        assert_eq!(v.lookup("bus"), Some(ClassLabel::Bus));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let e = parse("3 10 20 30 40 0 0 0 0 \"Car\"\n3 10 x 30 40 0 0 0 0 \"Car\"").unwrap_err();
        assert!(matches!(e, DataError::Parse { line: 2, .. }), "{e}");
        let e = parse("1 2 3").unwrap_err();
        assert!(matches!(e, DataError::Parse { line: 1, .. }));
        let e = parse("1 30 20 10 40 0 0 0 0 \"Car\"").unwrap_err();
        assert!(e.to_string().contains("inverted"));
    }

    #[test]
    fn unknown_label_names_offender() {
        let e = parse("1 0 0 1 1 0 0 0 0 \"Horse\"").unwrap_err();
        assert!(e.to_string().contains("Horse"));
    }

    #[test]
    fn bbox_center_examples() {
        let b = |a, b, c, d| BBox {
            xmin: a,
            ymin: b,
            xmax: c,
            ymax: d,
        };
        assert_eq!(bbox_center(&b(0.0, 0.0, 10.0, 20.0)), (5.0, 10.0));
        assert_eq!(bbox_center(&b(5.0, 5.0, 5.0, 5.0)), (5.0, 5.0));
        assert_eq!(bbox_center(&b(1.0, 2.0, 4.0, 8.0)), (2.5, 5.0));
    }

    proptest! {
        #[test]
        fn parse_serialize_parse_is_identity(
            track in 0u32..10_000,
            x0 in 0i32..2000, y0 in 0i32..2000, w in 0i32..200, h in 0i32..200,
            frame in 0i64..20_000,
            occ in any::<bool>(), gen in any::<bool>(),
            class in 0usize..6,
        ) {
            let a = RawAnnotation {
                track_id: track,
                frame,
                bbox: BBox { xmin: x0 as f64, ymin: y0 as f64, xmax: (x0 + w) as f64, ymax: (y0 + h) as f64 },
                lost: false,
                occluded: occ,
                generated: gen,
                label: ClassLabel::from_index(class).unwrap(),
            };
            let line = serialize_annotation(&a);
            let back = parse(&line).unwrap();
            prop_assert_eq!(back, vec![a]);
        }
    }
}
