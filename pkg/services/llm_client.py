"""
Chat-completion client for the instruction parser.

Sends one system + user message pair to an OpenAI-compatible endpoint and
returns the assistant text verbatim. Transport errors are retried with
exponential backoff; non-success statuses fail immediately.
"""

import logging
from typing import Any, Dict, List, Optional

import httpx
from tenacity import (
    RetryError,
    Retrying,
    retry_if_exception_type,
    stop_after_attempt,
    wait_exponential,
)

from models.errors import EndpointError
from models.style_config import EndpointConfig

logger = logging.getLogger(__name__)

SYSTEM_MESSAGE = (
    "You split image stylization instructions into the style to apply and the "
    "object to apply it to. Reply with a single JSON object and nothing else."
)

BODY_EXCERPT_CHARS = 200


def build_messages(prompt: str, system: str = SYSTEM_MESSAGE) -> List[Dict[str, str]]:
    """Chat messages for one prompt."""
    return [
        {'role': 'system', 'content': system},
        {'role': 'user', 'content': prompt},
    ]


def _log_retry(retry_state) -> None:
    """Tenacity hook: one warning per failed attempt."""
    exc = retry_state.outcome.exception()
    logger.warning(
        "LLM request attempt %d failed: %r; retrying", retry_state.attempt_number, exc
    )


class LLMClient:
    """
    Synchronous chat-completion client bound to one endpoint.

    Attributes:
        endpoint: Endpoint settings (URL, model, token, retries)
    """

    def __init__(
        self,
        endpoint: EndpointConfig,
        transport: Optional[httpx.BaseTransport] = None
    ) -> None:
        """
        Initialize the client.

        Args:
            endpoint: Endpoint settings
            transport: Optional httpx transport (tests pass a MockTransport)
        """
        self.endpoint = endpoint
        self._transport = transport

    def _headers(self) -> Dict[str, str]:
        headers = {'Content-Type': 'application/json'}
        if self.endpoint.api_key:
            headers['Authorization'] = f"Bearer {self.endpoint.api_key}"
        return headers

    def _payload(self, messages: List[Dict[str, str]]) -> Dict[str, Any]:
        return {
            'model': self.endpoint.model,
            'messages': messages,
            'temperature': self.endpoint.temperature,
            'max_tokens': self.endpoint.max_tokens,
        }

    def _post_once(self, client: httpx.Client, payload: Dict[str, Any]) -> httpx.Response:
        return client.post(self.endpoint.chat_url, json=payload, headers=self._headers())

    def complete(self, messages: List[Dict[str, str]]) -> str:
        """
        Send one chat-completion request and return the assistant text.

        Args:
            messages: Chat messages

        Returns:
            Assistant message content, verbatim

        Raises:
            EndpointError: Transport failure after all retries, non-success
                status, or a response without assistant content
        """
        payload = self._payload(messages)
        retrying = Retrying(
            stop=stop_after_attempt(self.endpoint.max_retries + 1),
            wait=wait_exponential(multiplier=self.endpoint.backoff, max=30),
            retry=retry_if_exception_type(httpx.TransportError),
            before_sleep=_log_retry,
        )

        with httpx.Client(timeout=self.endpoint.timeout, transport=self._transport) as client:
            try:
                response = retrying(self._post_once, client, payload)
            except RetryError as exc:
                last = exc.last_attempt.exception()
                raise EndpointError(
                    f"LLM endpoint {self.endpoint.chat_url} unreachable after "
                    f"{self.endpoint.max_retries + 1} attempts: {last}"
                ) from last

        if not response.is_success:
            excerpt = response.text[:BODY_EXCERPT_CHARS]
            raise EndpointError(
                f"LLM endpoint returned status {response.status_code}: {excerpt}",
                status=response.status_code,
            )

        try:
            return response.json()['choices'][0]['message']['content']
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise EndpointError(
                f"LLM endpoint returned an unexpected body: {response.text[:BODY_EXCERPT_CHARS]}",
                status=response.status_code,
            ) from exc


def query_llm(
    endpoint: EndpointConfig,
    prompt: str,
    transport: Optional[httpx.BaseTransport] = None
) -> str:
    """
    Send one prompt to the endpoint and return the raw assistant text.

    Raises:
        EndpointError: See LLMClient.complete
    """
    return LLMClient(endpoint, transport=transport).complete(build_messages(prompt))
