use serde::{Deserialize, Serialize};

use crate::diff::{EditScript, OpKind};
use crate::minilang::NodeKind;

/// Fix shapes whose effect always reaches the caller.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FixPattern {
    ChangeReturn,
    AddIfReturn,
    Other,
}

impl std::str::FromStr for FixPattern {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "ChangeReturn" => Ok(FixPattern::ChangeReturn),
            "AddIfReturn" => Ok(FixPattern::AddIfReturn),
            "Other" => Ok(FixPattern::Other),
            _ => Err(format!("unknown fix pattern `{s}`")),
        }
    }
}

/// ChangeReturn if some CHANGE rewrites a return into a return; else
/// AddIfReturn if some INSERT adds an `if` containing a return or throw.
pub fn classify_fix_pattern(script: &EditScript) -> FixPattern {
    let change_return = script.ops.iter().any(|op| {
        op.op == OpKind::Change
            && op.source.as_ref().is_some_and(|s| s.kind == NodeKind::Return)
            && op.target.as_ref().is_some_and(|t| t.kind == NodeKind::Return)
    });
    if change_return {
        return FixPattern::ChangeReturn;
    }
    let add_if = script.ops.iter().any(|op| {
        op.op == OpKind::Insert && op.target.as_ref().is_some_and(|t| t.kind == NodeKind::If && t.exits)
    });
    if add_if {
        FixPattern::AddIfReturn
    } else {
        FixPattern::Other
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diff::statement_script;
    use crate::minilang::parse;

    fn pattern(a: &str, b: &str) -> FixPattern {
        let (ua, ub) = (parse(a).unwrap(), parse(b).unwrap());
        classify_fix_pattern(&statement_script(&ua.functions[0], &ub.functions[0]))
    }

    const BASE: &str = "fn f(x:int)->int {\n    int y = x * 2;\n    return y;\n}\n";

    #[test]
    fn identity_is_other() {
        assert_eq!(pattern(BASE, BASE), FixPattern::Other);
    }

    #[test]
    fn changed_return() {
        let fixed = "fn f(x:int)->int {\n    int y = x * 2;\n    return y + 1;\n}\n";
        assert_eq!(pattern(BASE, fixed), FixPattern::ChangeReturn);
    }

    #[test]
    fn inserted_guard() {
        let fixed = "fn f(x:int)->int {\n    if (x < 0) {\n        throw \"negative\";\n    }\n    int y = x * 2;\n    return y;\n}\n";
        assert_eq!(pattern(BASE, fixed), FixPattern::AddIfReturn);
    }

    #[test]
    fn inserted_if_without_exit_is_other() {
        let fixed = "fn f(x:int)->int {\n    int y = x * 2;\n    if (y > 10) {\n        y = 10;\n    }\n    return y;\n}\n";
        assert_eq!(pattern(BASE, fixed), FixPattern::Other);
    }

    #[test]
    fn change_return_takes_precedence() {
        let fixed = "fn f(x:int)->int {\n    if (x < 0) {\n        return 0;\n    }\n    int y = x * 2;\n    return y - 1;\n}\n";
        assert_eq!(pattern(BASE, fixed), FixPattern::ChangeReturn);
    }
}
