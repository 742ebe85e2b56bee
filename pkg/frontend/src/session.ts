/** Session identity for the chat, one id per browser session.
 *
 * The server mints the id on the first reply; keeping it in
 * sessionStorage survives reloads but not a new browser session.
 */

const KEY = "crisisbot.session";

export function storedSession(storage: Storage): string | null {
  return storage.getItem(KEY);
}

export function rememberSession(storage: Storage, id: string): void {
  storage.setItem(KEY, id);
}
