"""
Mock chat-completion server for httpx.MockTransport.

Answers split prompts from a gold table, grades judge prompts with a fixed
score, and can simulate transport failures and error statuses.
"""

import json
from typing import Callable, Dict, List, Mapping, Optional

import httpx

from models.errors import InstructionParseError
from models.instruction import ParsedInstruction
from services.instruction_parser import extract_instruction


def format_split_reply(parsed: ParsedInstruction) -> str:
    """A typical model reply: prose around a fenced JSON object."""
    body = json.dumps({
        'StylizedContent': parsed.stylized_content,
        'StylizedObjects': parsed.stylized_objects,
    }, indent=2)
    return f"Here is the split:\n```json\n{body}\n```"


class MockChatServer:
    """
    Chat-completion endpoint double.

    Attributes:
        gold: Instruction text -> split returned for it
        fail_times: Leading requests answered with a connection error
        status: HTTP status for requests past the failures
        judge_score: Reply to judge prompts
        reply: Optional override producing the assistant text for a prompt
        requests: JSON bodies received, in order
    """

    def __init__(
        self,
        gold: Optional[Mapping[str, ParsedInstruction]] = None,
        fail_times: int = 0,
        status: int = 200,
        judge_score: str = "8",
        reply: Optional[Callable[[str], str]] = None
    ):
        """
        Initialize mock server.

        Args:
            gold: Known splits by instruction text
            fail_times: Number of leading requests that raise httpx.ConnectError
            status: Status code of answered requests
            judge_score: Text returned to judge prompts
            reply: Custom assistant text for a user prompt
        """
        self.gold: Dict[str, ParsedInstruction] = dict(gold or {})
        self.fail_times = fail_times
        self.status = status
        self.judge_score = judge_score
        self.reply = reply
        self.requests: List[dict] = []

    def transport(self) -> httpx.MockTransport:
        """httpx transport routed to this server."""
        return httpx.MockTransport(self.handle)

    def handle(self, request: httpx.Request) -> httpx.Response:
        """Answer one request."""
        body = json.loads(request.content.decode('utf-8'))
        self.requests.append(body)

        if self.fail_times > 0:
            self.fail_times -= 1
            raise httpx.ConnectError("simulated connection failure", request=request)
        if self.status != 200:
            return httpx.Response(self.status, text="simulated upstream failure")

        prompt = body['messages'][-1]['content']
        return httpx.Response(200, json={
            'choices': [{'index': 0, 'message': {'role': 'assistant', 'content': self._answer(prompt)}}],
        })

    def _answer(self, prompt: str) -> str:
        if self.reply is not None:
            return self.reply(prompt)
        if prompt.startswith("An image stylization instruction"):
            return self.judge_score
        try:
            text = extract_instruction(prompt).text
        except InstructionParseError:
            return "I can only split stylization instructions."
        parsed = self.gold.get(text)
        if parsed is None:
            return "I am not sure how to split that instruction."
        return format_split_reply(parsed)
