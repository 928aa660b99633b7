// Append-only conversation log. Nothing here touches the DOM so ordering
// rules can be tested without a browser.

export type Who = "user" | "bot" | "error";

export interface TranscriptEntry {
  who: Who;
  text: string;
  timestamp: number;
}

export class Transcript {
  private readonly log: TranscriptEntry[] = [];

  get entries(): readonly TranscriptEntry[] {
    return this.log;
  }

  append(who: Who, text: string, timestamp: number = Date.now()): TranscriptEntry {
    const entry = { who, text, timestamp };
    this.log.push(entry);
    return entry;
  }

  // bot bubbles land in exactly the order the server returned them
  appendResponses(texts: string[], timestamp: number = Date.now()): TranscriptEntry[] {
    return texts.map((text) => this.append("bot", text, timestamp));
  }
}
