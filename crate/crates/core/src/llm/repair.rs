//! One bounded repair re-ask for unparseable model output.

use super::{ChatExchange, ChatRequest, Gateway, GatewayError, LlmRole};

/// Opening of every repair instruction; backends and tests key on it.
pub const REPAIR_PREFIX: &str = "Your previous answer could not be used.";

/// A parsed value plus the exchanges that produced it.
#[derive(Clone, Debug)]
pub struct Repaired<T> {
    pub value: T,
    pub exchanges: Vec<ChatExchange>,
}

impl<T> Repaired<T> {
    pub fn final_exchange(&self) -> &ChatExchange {
        self.exchanges.last().expect("at least one exchange")
    }

    pub fn repaired(&self) -> bool {
        self.exchanges.len() > 1
    }
}

/// Appends the failed answer and the parse error as a corrective user turn.
pub fn repair_request(request: &ChatRequest, failed_answer: &str, error: &str) -> ChatRequest {
    request.clone().user(format!(
        "{REPAIR_PREFIX} Parsing failed with: {error}\n\n\
         Your answer was:\n{failed_answer}\n\n\
         Reply again with only the JSON requested above, with no commentary."
    ))
}

/// Sends `request`, parses the reply, and on a parse failure re-asks once.
///
/// Gateway errors are never repaired; they propagate immediately.
pub fn complete_with_repair<T, E>(
    gateway: &Gateway,
    role: &LlmRole,
    request: &ChatRequest,
    parse: impl Fn(&str) -> Result<T, E>,
) -> Result<Repaired<T>, E>
where
    E: From<GatewayError> + std::fmt::Display,
{
    let first = gateway.complete(role, request)?;
    let error = match parse(&first.response_text) {
        Ok(value) => return Ok(Repaired { value, exchanges: vec![first] }),
        Err(e) => e,
    };
    tracing::debug!(role = %role.role_id, %error, "re-asking after unparseable answer");
    let retry = repair_request(request, &first.response_text, &error.to_string());
    let second = gateway.complete(role, &retry)?;
    let value = parse(&second.response_text)?;
    Ok(Repaired { value, exchanges: vec![first, second] })
}
