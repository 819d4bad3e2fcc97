use super::{ChatBackend, ChatMessage, ChatRequest, BackendConfig, FinishReason, LlmError, ToolCall, ToolName, Transcript};

/// Executes tool calls on behalf of the loop. The returned text becomes the
/// tool response message.
pub trait ToolExecutor {
    fn execute(&mut self, call: &ToolCall) -> String;
}

impl<F: FnMut(&ToolCall) -> String> ToolExecutor for F {
    fn execute(&mut self, call: &ToolCall) -> String {
        self(call)
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{error}")]
pub struct LoopError {
    #[source]
    pub error: LlmError,
    /// Everything up to the failing request.
    pub transcript: Transcript,
}

/// Alternate model turns and tool executions until the model answers without
/// a tool call or `max_turns` tool rounds have been spent.
pub fn run_tool_loop(
    backend: &dyn ChatBackend,
    system_prompt: &str,
    task_prompt: &str,
    tools: &[ToolName],
    config: &BackendConfig,
    max_turns: usize,
    executor: &mut dyn ToolExecutor,
) -> Result<Transcript, LoopError> {
    assert!(max_turns >= 1, "max_turns must be at least 1");
    let mut transcript = Transcript::new(system_prompt);
    transcript.messages.push(ChatMessage::user(task_prompt));
    let mut rounds = 0;
    loop {
        let request = ChatRequest::new(transcript.request_messages(), config.clone()).with_tools(tools);
        let reply = match backend.complete(&request) {
            Ok(r) => r,
            Err(error) => {
                let reason = match error {
                    LlmError::BudgetExhausted => FinishReason::TokenBudget,
                    _ => FinishReason::Error,
                };
                transcript.finish(reason);
                return Err(LoopError { error, transcript });
            }
        };
        let call = reply.tool_call.clone();
        transcript.messages.push(reply);
        let Some(call) = call else {
            transcript.finish(FinishReason::Natural);
            return Ok(transcript);
        };
        let output = executor.execute(&call);
        transcript.messages.push(ChatMessage::tool_response(call.call_id, output));
        rounds += 1;
        if rounds == max_turns {
            transcript.finish(FinishReason::ToolBudget);
            return Ok(transcript);
        }
    }
}
