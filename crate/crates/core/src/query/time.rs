//! Four-slot time intervals and the keyword sugar over them.
//!
//! An interval `[b1, b2, b3, b4]` constrains a fact as follows, where a
//! `?` slot imposes nothing:
//!
//! * a point fact at `ts` needs `b1 <= ts <= b4`;
//! * a durated fact `[s, e]` needs `s >= b1`, `s >= b2`, `e <= b3`, `e <= b4`.

use super::ast::TimeKeyword;
use super::QueryError;
use crate::model::Timestamp;

pub type Interval = [Option<Timestamp>; 4];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotTemplate {
    Any,
    /// The keyword's n-th argument.
    Param(usize),
}

/// Slot template for a keyword such as `since` or `between`.
pub fn resolve_time_keyword(keyword: &str) -> Result<[SlotTemplate; 4], QueryError> {
    let kw = TimeKeyword::from_name(keyword).ok_or_else(|| QueryError::UnknownKeyword {
        keyword: keyword.to_owned(),
        line: 0,
        col: 0,
    })?;
    Ok(keyword_template(kw))
}

pub fn keyword_template(kw: TimeKeyword) -> [SlotTemplate; 4] {
    use SlotTemplate::{Any, Param};
    let t = Param(0);
    match kw {
        TimeKeyword::In | TimeKeyword::On | TimeKeyword::At | TimeKeyword::During => [t, t, t, t],
        TimeKeyword::Since => [t, t, Any, Any],
        TimeKeyword::After => [t, Any, Any, Any],
        TimeKeyword::Before => [Any, Any, Any, t],
        TimeKeyword::Till | TimeKeyword::Until | TimeKeyword::By => [Any, Any, t, t],
        TimeKeyword::Between => [t, Any, Any, Param(1)],
    }
}

/// Fill a template with concrete arguments.
pub fn instantiate(template: [SlotTemplate; 4], args: &[Timestamp]) -> Interval {
    template.map(|slot| match slot {
        SlotTemplate::Any => None,
        SlotTemplate::Param(i) => args.get(i).copied(),
    })
}

pub fn time_filter(ts: Timestamp, interval: &Interval) -> bool {
    interval[0].is_none_or(|b| ts >= b) && interval[3].is_none_or(|b| ts <= b)
}

pub fn span_filter(start: Timestamp, end: Timestamp, interval: &Interval) -> bool {
    let [b1, b2, b3, b4] = interval;
    b1.is_none_or(|b| start >= b)
        && b2.is_none_or(|b| start >= b)
        && b3.is_none_or(|b| end <= b)
        && b4.is_none_or(|b| end <= b)
}
