//! Single-field mutations over the serde tree of a value.
//!
//! A field is a leaf of the JSON image: a number, a bool, a byte or word
//! blob (an array of numbers, which covers field elements, keys and
//! ciphertexts), an optional value, or a list of structured items.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Number,
    Bool,
    Blob,
    List,
    Other,
}

pub struct Slots {
    image: Value,
    slots: Vec<(String, Kind)>,
}

fn is_blob(items: &[Value]) -> bool {
    !items.is_empty() && items.iter().all(Value::is_number)
}

fn collect(v: &Value, ptr: String, out: &mut Vec<(String, Kind)>) {
    match v {
        Value::Number(_) => out.push((ptr, Kind::Number)),
        Value::Bool(_) => out.push((ptr, Kind::Bool)),
        Value::Array(items) if is_blob(items) => out.push((ptr, Kind::Blob)),
        Value::Array(items) => {
            if !items.is_empty() {
                out.push((ptr.clone(), Kind::List));
            }
            for (i, item) in items.iter().enumerate() {
                collect(item, format!("{ptr}/{i}"), out);
            }
        }
        Value::Object(map) => {
            if !ptr.is_empty() {
                out.push((ptr.clone(), Kind::Other));
            }
            for (k, item) in map {
                collect(item, format!("{ptr}/{k}"), out);
            }
        }
        Value::String(_) => out.push((ptr, Kind::Other)),
        Value::Null => {}
    }
}

impl Slots {
    pub fn of<T: Serialize>(value: &T) -> Slots {
        let image = serde_json::to_value(value).expect("serializable");
        let mut slots = Vec::new();
        collect(&image, String::new(), &mut slots);
        Slots { image, slots }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    /// One mutated copy, if it still decodes and differs from the original.
    pub fn mutate<T: DeserializeOwned + PartialEq, R: Rng>(&self, original: &T, rng: &mut R) -> Option<T> {
        let (ptr, kind) = self.slots.choose(rng)?;
        let mut image = self.image.clone();
        let slot = image.pointer_mut(ptr)?;
        if rng.gen_ratio(1, 20) {
            *slot = Value::Null;
        } else {
            match kind {
                Kind::Number => *slot = number(slot, rng),
                Kind::Bool => *slot = Value::Bool(!slot.as_bool()?),
                Kind::Blob => blob(slot.as_array_mut()?, rng),
                Kind::List => list(slot.as_array_mut()?, rng),
                Kind::Other => return None,
            }
        }
        let out: T = serde_json::from_value(image).ok()?;
        (out != *original).then_some(out)
    }
}

fn number<R: Rng>(v: &Value, rng: &mut R) -> Value {
    let n = v.as_i64().map(i128::from).or(v.as_u64().map(i128::from)).unwrap_or(0);
    let m = match rng.gen_range(0..6) {
        0 => n + 1,
        1 => n - 1,
        2 => 0,
        3 => -n,
        4 => rng.gen_range(0..1i128 << 32),
        _ => n ^ (1 << rng.gen_range(0..63)),
    };
    if let Ok(x) = u64::try_from(m) {
        Value::from(x)
    } else {
        Value::from(i64::try_from(m).unwrap_or(i64::MIN))
    }
}

fn blob<R: Rng>(items: &mut Vec<Value>, rng: &mut R) {
    let bytes = items.iter().all(|x| x.as_u64().is_some_and(|b| b <= 255));
    let width = if bytes { 8 } else { 64 };
    match rng.gen_range(0..10) {
        // a fresh value of the same width; for 32-byte fields, usually canonical
        0..=2 => {
            for (i, x) in items.iter_mut().enumerate() {
                let mut b = rng.gen::<u64>() & if bytes { 0xff } else { u64::MAX };
                if bytes && i == 0 && rng.gen_bool(0.9) {
                    b &= 0x1f;
                }
                *x = Value::from(b);
            }
        }
        3 => {
            let last = items.len() - 1;
            let b = items[last].as_u64().unwrap_or(0);
            items[last] = Value::from(b.wrapping_add(1) & if bytes { 0xff } else { u64::MAX });
        }
        4 => {
            if rng.gen_bool(0.5) {
                items.pop();
            } else {
                items.push(Value::from(rng.gen_range(0..256u64)));
            }
        }
        _ => {
            let i = rng.gen_range(0..items.len());
            let b = items[i].as_u64().unwrap_or(0);
            items[i] = Value::from(b ^ (1u64 << rng.gen_range(0..width)));
        }
    }
}

fn list<R: Rng>(items: &mut Vec<Value>, rng: &mut R) {
    let i = rng.gen_range(0..items.len());
    match rng.gen_range(0..3) {
        0 => {
            items.remove(i);
        }
        1 => {
            let dup = items[i].clone();
            items.insert(i, dup);
        }
        _ => {
            let j = rng.gen_range(0..items.len());
            items.swap(i, j);
        }
    }
}
