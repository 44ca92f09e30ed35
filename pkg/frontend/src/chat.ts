/**
 * Chat pane flow: send a message, project the AnswerBundle into a card.
 * Failures become an inline error card and the caller keeps the draft.
 */

import { ApiClient, ApiError } from "./api.js";
import type { MessageCard, ViewState } from "./state.js";

export interface SendOutcome {
  ok: boolean;
  card: MessageCard;
  /** the input box should keep the draft text after a failure */
  preserveDraft: boolean;
}

export function canSend(draft: string): boolean {
  return draft.trim().length > 0;
}

export function cardMetaLine(card: MessageCard): string {
  if (card.role !== "assistant" || card.iterationsUsed === undefined) return "";
  const score = card.finalScore === undefined ? "?" : card.finalScore.toFixed(2);
  return `${card.iterationsUsed} iteration${card.iterationsUsed === 1 ? "" : "s"} · score ${score}`;
}

export async function sendMessage(
  api: ApiClient,
  state: ViewState,
  text: string,
): Promise<SendOutcome> {
  if (!canSend(text)) {
    return { ok: false, card: { role: "error", text: "empty message" }, preserveDraft: true };
  }
  if (state.sessionId === null) {
    state.sessionId = await api.createSession();
  }
  state.addUserMessage(text);
  try {
    const bundle = await api.sendMessage(state.sessionId, text);
    return { ok: true, card: state.addAnswer(bundle), preserveDraft: false };
  } catch (error) {
    const detail =
      error instanceof ApiError ? `server error ${error.status} (${error.kind})` : String(error);
    return { ok: false, card: state.addError(detail), preserveDraft: true };
  }
}
